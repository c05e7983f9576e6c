#include "countvqa/data.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "countvqa/language.hpp"

namespace cvqa {

using nlohmann::json;

namespace {

const std::vector<std::string> kCountPhrases = {"how many", "number of", "amount of",
                                                "count of"};
const std::string kRejectPhrase = "number of the";

std::string joined_tokens(const std::string& text) {
    std::string out;
    for (const auto& t : tokenize(text)) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

const std::vector<std::string> kNumberWords = {
    "zero", "one",  "two",  "three", "four",  "five",  "six",  "seven",  "eight",  "nine",  "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty"};

const std::set<std::string> kSubjectStops = {
    "are", "is",    "was",  "were", "there", "the",  "a",     "an",   "that", "this",
    "these", "those", "it",  "they", "you",  "we",   "i",     "do",   "does", "did",
    "can",  "could", "will", "would", "in",  "on",   "at",    "of",   "to",   "and",
    "or"};

json parse_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        // e.what() carries the byte offset of the violation
        throw std::runtime_error(path + ": " + e.what());
    }
}

}  // namespace

const char* filter_reason_name(FilterReason r) {
    switch (r) {
        case FilterReason::KEEP: return "KEEP";
        case FilterReason::NO_PHRASE: return "NO_PHRASE";
        case FilterReason::REJECT_PHRASE: return "REJECT_PHRASE";
        case FilterReason::NON_NUMERIC: return "NON_NUMERIC";
        case FilterReason::OUT_OF_RANGE: return "OUT_OF_RANGE";
    }
    return "?";
}

std::optional<int> parse_count_answer(const std::string& answer) {
    std::string s;
    for (char c : answer) {
        if (!std::isspace(static_cast<unsigned char>(c)))
            s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (s.empty()) return std::nullopt;
    bool digits = std::all_of(s.begin(), s.end(),
                              [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    if (digits) {
        if (s.size() > 9) return 1 << 30;  // far out of range but numeric
        return std::stoi(s);
    }
    for (std::size_t i = 0; i < kNumberWords.size(); ++i)
        if (s == kNumberWords[i]) return static_cast<int>(i);
    return std::nullopt;
}

FilterReason filter_howmany(const std::string& question, const std::string& answer) {
    std::string q = joined_tokens(question);
    bool has_phrase = false;
    for (const auto& p : kCountPhrases)
        if (q.find(p) != std::string::npos) {
            has_phrase = true;
            break;
        }
    if (!has_phrase) return FilterReason::NO_PHRASE;
    if (q.find(kRejectPhrase) != std::string::npos) return FilterReason::REJECT_PHRASE;
    auto n = parse_count_answer(answer);
    if (!n) return FilterReason::NON_NUMERIC;
    if (*n < 0 || *n > 20) return FilterReason::OUT_OF_RANGE;
    return FilterReason::KEEP;
}

std::string strip_plural(const std::string& word) {
    auto ends_with = [&word](const char* suf) {
        std::string s(suf);
        return word.size() >= s.size() && word.compare(word.size() - s.size(), s.size(), s) == 0;
    };
    if (word.size() >= 4 && ends_with("ies")) return word.substr(0, word.size() - 3) + "y";
    if (ends_with("ses") || ends_with("xes") || ends_with("zes") || ends_with("ches") ||
        ends_with("shes"))
        return word.substr(0, word.size() - 2);
    if (word.size() >= 2 && word.back() == 's' && word[word.size() - 2] != 's')
        return word.substr(0, word.size() - 1);
    return word;
}

std::string extract_subject(const std::vector<std::string>& tokens) {
    // locate the first count phrase
    std::size_t after = tokens.size();
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        for (const auto& phrase : kCountPhrases) {
            std::istringstream ss(phrase);
            std::string w1, w2;
            ss >> w1 >> w2;
            if (tokens[i] == w1 && tokens[i + 1] == w2) {
                after = i + 2;
                break;
            }
        }
        if (after != tokens.size()) break;
    }
    for (std::size_t i = after; i < tokens.size(); ++i) {
        if (kSubjectStops.count(tokens[i])) continue;
        return strip_plural(tokens[i]);
    }
    return kUnknownSubject;
}

void assign_frequency_bins(const std::vector<QARecord>& train, std::vector<QARecord>& eval_split) {
    detail::require(!train.empty(), "frequency_bins: empty training split");
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& qa : train) ++freq[qa.subject];

    std::vector<std::size_t> seen;
    for (std::size_t i = 0; i < eval_split.size(); ++i) {
        auto it = freq.find(eval_split[i].subject);
        if (it == freq.end()) {
            eval_split[i].bin = 6;
        } else {
            seen.push_back(i);
        }
    }
    // group by training frequency, most common first; a frequency never
    // splits across bins, so an all-ties split degenerates to one bin
    std::map<std::size_t, std::vector<std::size_t>, std::greater<>> groups;
    for (std::size_t i : seen) groups[freq[eval_split[i].subject]].push_back(i);

    std::size_t remaining = seen.size();
    int bins_left = 5, bin = 1;
    std::size_t in_bin = 0;
    for (auto& [f, members] : groups) {
        for (std::size_t i : members) eval_split[i].bin = bin;
        in_bin += members.size();
        remaining -= members.size();
        double target = static_cast<double>(remaining + in_bin) / bins_left;
        if (static_cast<double>(in_bin) >= target && bin < 5) {
            ++bin;
            --bins_left;
            in_bin = 0;
        }
    }
}

std::vector<RawQA> load_vqa_annotations(const std::string& questions_file,
                                        const std::string& annotations_file,
                                        std::vector<std::string>* warnings) {
    json qj = parse_json_file(questions_file);
    json aj = parse_json_file(annotations_file);
    if (!qj.contains("questions"))
        throw std::runtime_error(questions_file + ": missing 'questions' array");
    if (!aj.contains("annotations"))
        throw std::runtime_error(annotations_file + ": missing 'annotations' array");

    struct Ann {
        std::string consensus;
        std::vector<std::string> answers;
    };
    std::unordered_map<long long, Ann> ann_by_qid;
    for (const auto& a : aj["annotations"]) {
        Ann ann;
        ann.consensus = a.at("multiple_choice_answer").get<std::string>();
        for (const auto& e : a.at("answers")) ann.answers.push_back(e.at("answer").get<std::string>());
        ann_by_qid[a.at("question_id").get<long long>()] = std::move(ann);
    }

    std::vector<RawQA> out;
    for (const auto& q : qj["questions"]) {
        RawQA raw;
        raw.question_id = q.at("question_id").get<long long>();
        raw.image_id = q.at("image_id").get<long long>();
        raw.question = q.at("question").get<std::string>();
        auto it = ann_by_qid.find(raw.question_id);
        if (it == ann_by_qid.end())
            throw std::runtime_error(annotations_file + ": no annotation for question id " +
                                     std::to_string(raw.question_id));
        raw.consensus_answer = it->second.consensus;
        raw.human_answers = it->second.answers;
        if (raw.human_answers.size() != 10) {
            if (warnings)
                warnings->push_back("question " + std::to_string(raw.question_id) + ": " +
                                    std::to_string(raw.human_answers.size()) +
                                    " answers instead of 10; excluded");
            continue;
        }
        out.push_back(std::move(raw));
    }
    return out;
}

QARecord make_qa_record(const RawQA& raw) {
    QARecord qa;
    qa.question_id = raw.question_id;
    qa.image_id = std::to_string(raw.image_id);
    qa.question = raw.question;
    qa.tokens = tokenize(raw.question);
    auto n = parse_count_answer(raw.consensus_answer);
    detail::require(n.has_value() && *n >= 0 && *n <= 20,
                    "make_qa_record: consensus answer is not a count in range");
    qa.gt_count = *n;
    qa.human_answers = raw.human_answers;
    qa.subject = extract_subject(qa.tokens);
    return qa;
}

namespace {

std::vector<QARecord> filter_records(const std::vector<RawQA>& in) {
    std::vector<QARecord> out;
    for (const auto& raw : in)
        if (filter_howmany(raw.question, raw.consensus_answer) == FilterReason::KEEP)
            out.push_back(make_qa_record(raw));
    return out;
}

}  // namespace

DatasetSplits build_howmany_splits(const SplitInputs& in) {
    DatasetSplits out;
    out.train = filter_records(in.vqa_train);

    std::unordered_set<long long> train_images(in.vqa_train_image_ids.begin(),
                                               in.vqa_train_image_ids.end());
    std::vector<RawQA> vg_kept;
    for (const auto& raw : in.vg_train)
        if (train_images.count(raw.image_id)) vg_kept.push_back(raw);
    for (auto& qa : filter_records(vg_kept)) out.train.push_back(std::move(qa));

    std::vector<QARecord> val = filter_records(in.vqa_val);
    if (in.test_manifest) {
        std::unordered_set<long long> test_ids(in.test_manifest->begin(),
                                               in.test_manifest->end());
        std::unordered_set<long long> dev_ids;
        if (in.dev_manifest) dev_ids.insert(in.dev_manifest->begin(), in.dev_manifest->end());
        std::size_t found = 0;
        for (auto& qa : val) {
            if (test_ids.count(qa.question_id)) {
                out.test.push_back(qa);
                ++found;
            } else if (!in.dev_manifest || dev_ids.count(qa.question_id)) {
                out.dev.push_back(qa);
            }
        }
        if (found != test_ids.size())
            throw std::runtime_error("test manifest lists " + std::to_string(test_ids.size()) +
                                     " ids but only " + std::to_string(found) +
                                     " are in the filtered validation set");
    } else {
        detail::require(val.size() > in.test_size,
                        "validation set too small for a " + std::to_string(in.test_size) +
                            "-question test draw");
        std::vector<std::size_t> order(val.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng = Rng::derive(in.seed, {0x7e57});
        rng.shuffle(order);
        std::unordered_set<std::size_t> test_idx(order.begin(),
                                                 order.begin() + static_cast<long>(in.test_size));
        for (std::size_t i = 0; i < val.size(); ++i)
            (test_idx.count(i) ? out.test : out.dev).push_back(val[i]);
    }

    auto by_qid = [](const QARecord& a, const QARecord& b) { return a.question_id < b.question_id; };
    std::sort(out.train.begin(), out.train.end(), by_qid);
    std::sort(out.dev.begin(), out.dev.end(), by_qid);
    std::sort(out.test.begin(), out.test.end(), by_qid);

    // disjoint question ids across splits
    std::unordered_set<long long> qids;
    for (const auto* split : {&out.train, &out.dev, &out.test})
        for (const auto& qa : *split)
            if (!qids.insert(qa.question_id).second)
                throw std::runtime_error("duplicate question id across splits: " +
                                         std::to_string(qa.question_id));

    // reject train-vs-eval image leakage (VG pairs must not reach dev/test)
    std::unordered_set<std::string> train_imgs;
    for (const auto& qa : out.train) train_imgs.insert(qa.image_id);
    for (const auto* split : {&out.dev, &out.test})
        for (const auto& qa : *split)
            if (train_imgs.count(qa.image_id))
                throw std::runtime_error("image id " + qa.image_id +
                                         " appears in both train and an eval split");

    if (!out.train.empty()) {
        assign_frequency_bins(out.train, out.dev);
        assign_frequency_bins(out.train, out.test);
    }
    return out;
}

std::vector<long long> read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open manifest " + path);
    std::vector<long long> ids;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ids.push_back(std::stoll(line));
    }
    return ids;
}

void write_manifest(const std::vector<long long>& ids, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write manifest " + path);
    for (long long id : ids) os << id << "\n";
}

std::map<std::string, std::vector<CaptionRecord>> load_region_captions(const std::string& path) {
    json j = parse_json_file(path);
    std::map<std::string, std::vector<CaptionRecord>> out;
    for (const auto& img : j) {
        std::string image_id;
        const auto& raw_id = img.at("image_id");
        if (raw_id.is_string())
            image_id = raw_id.get<std::string>();
        else
            image_id = std::to_string(raw_id.get<long long>());
        auto& list = out[image_id];
        for (const auto& r : img.at("regions")) {
            CaptionRecord cap;
            cap.tokens = tokenize(r.at("caption").get<std::string>());
            double x = r.at("x").get<double>();
            double y = r.at("y").get<double>();
            double w = r.at("width").get<double>();
            double h = r.at("height").get<double>();
            cap.region = Box{x, y, x + w, y + h};
            list.push_back(std::move(cap));
        }
    }
    return out;
}

}  // namespace cvqa
