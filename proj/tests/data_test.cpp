#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "countvqa/data.hpp"
#include "countvqa/features_io.hpp"
#include "countvqa/geometry.hpp"
#include "countvqa/language.hpp"
#include "countvqa/synth.hpp"

using namespace cvqa;

TEST_SUITE_BEGIN("data");

TEST_CASE("filter_howmany classifies the archetypes") {
    CHECK(filter_howmany("How many dogs are there?", "2") == FilterReason::KEEP);
    CHECK(filter_howmany("What is the number of the bus?", "42") == FilterReason::REJECT_PHRASE);
    CHECK(filter_howmany("How many people live in this city?", "thousands") ==
          FilterReason::NON_NUMERIC);
    CHECK(filter_howmany("How many windows?", "25") == FilterReason::OUT_OF_RANGE);
    CHECK(filter_howmany("What time is it?", "3:00") == FilterReason::NO_PHRASE);
    CHECK(filter_howmany("What amount of sugar is shown?", "3") == FilterReason::KEEP);
    CHECK(filter_howmany("Give a count of boats", "twenty") == FilterReason::KEEP);
    CHECK(filter_howmany("How many cats?", "two") == FilterReason::KEEP);
}

TEST_CASE("filter decisions are stable under case and whitespace") {
    auto base = filter_howmany("how many dogs are there", "2");
    CHECK(filter_howmany("HOW MANY DOGS ARE THERE", "2") == base);
    CHECK(filter_howmany("  How  many   dogs are there?  ", "  2 ") == base);
    CHECK(filter_howmany("How\tmany dogs\nare there", "2") == base);
}

TEST_CASE("parse_count_answer") {
    CHECK(parse_count_answer("0") == 0);
    CHECK(parse_count_answer("20") == 20);
    CHECK(parse_count_answer(" 7 ") == 7);
    CHECK(parse_count_answer("twenty") == 20);
    CHECK(parse_count_answer("Zero") == 0);
    CHECK(!parse_count_answer("3:00").has_value());
    CHECK(!parse_count_answer("a few").has_value());
    CHECK(!parse_count_answer("").has_value());
    CHECK(*parse_count_answer("120") > 20);
    CHECK(!parse_count_answer("-3").has_value());
}

TEST_CASE("subject extraction") {
    CHECK(extract_subject(tokenize("how many dogs are on the couch")) == "dog");
    CHECK(extract_subject(tokenize("how many are there")) == kUnknownSubject);
    // "red" is not stop-listed, so it wins; pinned heuristic behavior
    CHECK(extract_subject(tokenize("number of red buses")) == "red");
    CHECK(extract_subject(tokenize("how many of the dogs are asleep")) == "dog");
    CHECK(extract_subject(tokenize("what time is it")) == kUnknownSubject);
    CHECK(extract_subject(tokenize("count of boxes")) == "box");
}

TEST_CASE("plural stripping") {
    CHECK(strip_plural("dogs") == "dog");
    CHECK(strip_plural("buses") == "bus");
    CHECK(strip_plural("boxes") == "box");
    CHECK(strip_plural("glasses") == "glass");
    CHECK(strip_plural("puppies") == "puppy");
    CHECK(strip_plural("crosses") == "cross");
    CHECK(strip_plural("glass") == "glass");
    CHECK(strip_plural("dog") == "dog");
}

namespace {

QARecord qa_with(long long id, const std::string& subject) {
    QARecord qa;
    qa.question_id = id;
    qa.subject = subject;
    return qa;
}

}  // namespace

TEST_CASE("frequency bins") {
    SUBCASE("unseen subjects land in bin six") {
        std::vector<QARecord> train{qa_with(1, "dog")};
        std::vector<QARecord> eval{qa_with(2, "unicorn")};
        assign_frequency_bins(train, eval);
        CHECK(eval[0].bin == 6);
    }
    SUBCASE("a single shared frequency collapses to one bin") {
        std::vector<QARecord> train;
        for (int i = 0; i < 4; ++i) train.push_back(qa_with(i, "s" + std::to_string(i)));
        std::vector<QARecord> eval;
        for (int i = 0; i < 12; ++i) eval.push_back(qa_with(100 + i, "s" + std::to_string(i % 4)));
        assign_frequency_bins(train, eval);
        for (const auto& qa : eval) CHECK(qa.bin == 1);
    }
    SUBCASE("distinct frequencies balance bin sizes within one") {
        std::vector<QARecord> train;
        long long id = 0;
        for (int s = 0; s < 10; ++s)
            for (int k = 0; k <= s; ++k) train.push_back(qa_with(id++, "s" + std::to_string(s)));
        std::vector<QARecord> eval;
        for (int s = 0; s < 10; ++s) eval.push_back(qa_with(1000 + s, "s" + std::to_string(s)));
        assign_frequency_bins(train, eval);
        std::vector<int> sizes(7, 0);
        for (const auto& qa : eval) ++sizes[static_cast<std::size_t>(qa.bin)];
        for (int b = 1; b <= 5; ++b) {
            CHECK(sizes[static_cast<std::size_t>(b)] >= 1);
            CHECK(sizes[static_cast<std::size_t>(b)] <= 3);
        }
        CHECK(sizes[6] == 0);
        // bin 1 holds the most frequent subject
        for (const auto& qa : eval)
            if (qa.subject == "s9") CHECK(qa.bin == 1);
        CHECK_THROWS(assign_frequency_bins({}, eval));
    }
}

TEST_CASE("synthetic scenes") {
    SynthConfig cfg;
    cfg.categories = 3;
    cfg.d_v = 8;
    cfg.seed = 42;

    SUBCASE("no duplicates or distractors means proposals equal true objects") {
        cfg.duplicate_rate = 0.0;
        cfg.distractor_rate = 0.0;
        for (std::uint64_t i = 0; i < 50; ++i) {
            SceneRecord s = generate_synthetic_scene(cfg, i);
            CHECK(s.object_count() == s.gt_objects.size());
        }
    }
    SUBCASE("generation is a pure function of config and seed") {
        SceneRecord a = generate_synthetic_scene(cfg, 7);
        SceneRecord b = generate_synthetic_scene(cfg, 7);
        CHECK(a.image_id == b.image_id);
        REQUIRE(a.object_count() == b.object_count());
        for (std::size_t i = 0; i < a.object_count(); ++i) {
            CHECK(a.boxes[i].x1 == b.boxes[i].x1);
            CHECK(a.proposal_labels[i] == b.proposal_labels[i]);
        }
        CHECK(a.features.data() == b.features.data());
        QARecord qa1 = generate_synthetic_qa(cfg, a, 7);
        QARecord qa2 = generate_synthetic_qa(cfg, b, 7);
        CHECK(qa1.question == qa2.question);
        CHECK(qa1.gt_count == qa2.gt_count);
    }
    SUBCASE("duplicate IoU stays in the configured band") {
        cfg.duplicate_rate = 1.0;
        std::size_t checked = 0;
        for (std::uint64_t i = 0; i < 400; ++i) {
            SceneRecord s = generate_synthetic_scene(cfg, i);
            // every true object has exactly one duplicate: find same-label pairs
            for (std::size_t a = 0; a < s.object_count(); ++a)
                for (std::size_t b = a + 1; b < s.object_count(); ++b) {
                    if (s.proposal_labels[a] != s.proposal_labels[b]) continue;
                    double v = iou(s.boxes[a], s.boxes[b]);
                    if (v <= 0.0) continue;  // distinct objects of one category
                    if (v >= cfg.dup_iou_min - 1e-9) {
                        CHECK(v <= cfg.dup_iou_max + 1e-9);
                        ++checked;
                    }
                }
        }
        CHECK(checked > 100);
    }
    SUBCASE("questions never ask for more than the scene holds") {
        cfg.duplicate_rate = 0.5;
        cfg.distractor_rate = 0.3;
        auto words = category_words(cfg.categories);
        for (std::uint64_t i = 0; i < 300; ++i) {
            SceneRecord s = generate_synthetic_scene(cfg, i);
            QARecord qa = generate_synthetic_qa(cfg, s, i);
            int cat = -1;
            for (int c = 0; c < cfg.categories; ++c)
                if (qa.subject == words[static_cast<std::size_t>(c)]) cat = c;
            REQUIRE(cat >= 0);
            int proposals_of_cat = 0;
            for (int lab : s.proposal_labels)
                if (lab == cat) ++proposals_of_cat;
            CHECK(qa.gt_count <= proposals_of_cat);
            CHECK(qa.human_answers.size() == 10);
            for (const auto& a : qa.human_answers) CHECK(a == std::to_string(qa.gt_count));
        }
    }
    SUBCASE("zero-count questions appear at a nonzero rate") {
        cfg.zero_question_rate = 0.5;
        int zeros = 0;
        for (std::uint64_t i = 0; i < 200; ++i) {
            SceneRecord s = generate_synthetic_scene(cfg, i);
            QARecord qa = generate_synthetic_qa(cfg, s, i);
            if (qa.gt_count == 0) ++zeros;
        }
        CHECK(zeros > 30);
        CHECK(zeros < 170);
    }
}

TEST_CASE("vqa annotation loading") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "cvqa_vqa_test";
    fs::create_directories(dir);
    auto qpath = (dir / "q.json").string();
    auto apath = (dir / "a.json").string();

    auto write_files = [&](bool drop_annotation, int answer_count) {
        std::ofstream qs(qpath);
        qs << R"({"questions":[
            {"question_id": 10, "image_id": 1, "question": "How many dogs are there?"},
            {"question_id": 11, "image_id": 2, "question": "What color is the sky?"}]})";
        std::ofstream as(apath);
        as << R"({"annotations":[)";
        as << R"({"question_id": 10, "image_id": 1, "multiple_choice_answer": "2", "answers": [)";
        for (int i = 0; i < answer_count; ++i) {
            if (i) as << ",";
            as << R"({"answer": "2"})";
        }
        as << "]}";
        if (!drop_annotation)
            as << R"(,{"question_id": 11, "image_id": 2, "multiple_choice_answer": "blue",
                      "answers": [{"answer":"blue"},{"answer":"blue"},{"answer":"blue"},
                                  {"answer":"blue"},{"answer":"blue"},{"answer":"blue"},
                                  {"answer":"blue"},{"answer":"blue"},{"answer":"blue"},
                                  {"answer":"blue"}]})";
        as << "]}";
    };

    SUBCASE("a minimal fixture round-trips") {
        write_files(false, 10);
        auto raw = load_vqa_annotations(qpath, apath);
        REQUIRE(raw.size() == 2);
        CHECK(raw[0].question_id == 10);
        CHECK(raw[0].consensus_answer == "2");
        CHECK(raw[0].human_answers.size() == 10);
        QARecord qa = make_qa_record(raw[0]);
        CHECK(qa.gt_count == 2);
        CHECK(qa.subject == "dog");
        CHECK(qa.image_id == "1");
    }
    SUBCASE("a missing annotation names the question id") {
        write_files(true, 10);
        try {
            load_vqa_annotations(qpath, apath);
            FAIL("expected an error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("11") != std::string::npos);
        }
    }
    SUBCASE("a non-ten answer list warns and excludes the question") {
        write_files(false, 9);
        std::vector<std::string> warnings;
        auto raw = load_vqa_annotations(qpath, apath, &warnings);
        CHECK(raw.size() == 1);  // question 10 dropped, question 11 kept
        CHECK(raw[0].question_id == 11);
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("10") != std::string::npos);
    }
    SUBCASE("malformed json reports the offset") {
        std::ofstream qs(qpath);
        qs << R"({"questions": [)";
        qs.close();
        CHECK_THROWS(load_vqa_annotations(qpath, apath));
    }
}

TEST_CASE("feature container") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "cvqa_feat_test";
    fs::create_directories(dir);
    auto path = (dir / "f.bin").string();

    SynthConfig cfg;
    cfg.d_v = 6;
    cfg.seed = 3;
    std::vector<SceneRecord> scenes;
    for (std::uint64_t i = 0; i < 5; ++i) scenes.push_back(generate_synthetic_scene(cfg, i));
    SceneRecord empty;
    empty.image_id = "empty";
    empty.features = Tensor({0, 6});
    scenes.push_back(empty);

    SUBCASE("write/read round-trips bit-exactly at container precision") {
        write_features(scenes, path);
        auto loaded = read_features(path);
        REQUIRE(loaded.size() == scenes.size());
        CHECK(loaded.back().image_id == "empty");
        CHECK(loaded.back().object_count() == 0);

        auto path2 = (dir / "g.bin").string();
        write_features(loaded, path2);
        std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
        std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(c1 == c2);
    }
    SUBCASE("truncation and corruption are detected") {
        write_features(scenes, path);
        std::ifstream f1(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        f1.close();

        auto broken = (dir / "broken.bin").string();
        {
            std::ofstream os(broken, std::ios::binary);
            os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        }
        CHECK_THROWS(read_features(broken));
        {
            std::string corrupted = bytes;
            corrupted[20] = static_cast<char>(corrupted[20] ^ 0x7f);
            std::ofstream os(broken, std::ios::binary);
            os.write(corrupted.data(), static_cast<std::streamsize>(corrupted.size()));
        }
        CHECK_THROWS_WITH_AS(read_features(broken), doctest::Contains("CRC"), std::runtime_error);
    }
    SUBCASE("labels sidecar round-trips") {
        auto lpath = (dir / "labels.json").string();
        write_labels(scenes, category_words(cfg.categories), lpath);
        LabelFile labels = read_labels(lpath);
        CHECK(labels.categories == category_words(cfg.categories));
        write_features(scenes, path);
        auto loaded = read_features(path);
        apply_labels(labels, loaded);
        for (std::size_t i = 0; i < loaded.size(); ++i) {
            CHECK(loaded[i].proposal_labels == scenes[i].proposal_labels);
            CHECK(loaded[i].gt_objects.size() == scenes[i].gt_objects.size());
        }
    }
}

namespace {

RawQA raw_qa(long long qid, long long img, const std::string& q, const std::string& a) {
    RawQA r;
    r.question_id = qid;
    r.image_id = img;
    r.question = q;
    r.consensus_answer = a;
    r.human_answers.assign(10, a);
    return r;
}

}  // namespace

TEST_CASE("howmany splits") {
    SplitInputs in;
    in.seed = 5;
    in.test_size = 2;
    // 6-question fixture, 3 keepable
    in.vqa_train = {
        raw_qa(1, 100, "How many dogs are there?", "2"),
        raw_qa(2, 100, "What time is it?", "3:00"),
        raw_qa(3, 101, "Number of cats?", "1"),
        raw_qa(4, 102, "How many windows?", "50"),
        raw_qa(5, 103, "What is the number of the bus?", "4"),
        raw_qa(6, 104, "Count of boats?", "0"),
    };
    for (long long qid = 20; qid < 27; ++qid)
        in.vqa_val.push_back(
            raw_qa(qid, 200 + qid, "How many birds are there?", std::to_string(qid % 3)));
    for (const RawQA& r : in.vqa_train) in.vqa_train_image_ids.push_back(r.image_id);

    SUBCASE("fixture keep count and empty VG") {
        DatasetSplits s = build_howmany_splits(in);
        CHECK(s.train.size() == 3);
        CHECK(s.dev.size() + s.test.size() == 7);
        CHECK(s.test.size() == 2);
    }
    SUBCASE("VG pairs join only for training images") {
        in.vg_train = {raw_qa(50, 100, "How many bones are there?", "3"),
                       raw_qa(51, 999, "How many bones are there?", "3")};
        DatasetSplits s = build_howmany_splits(in);
        CHECK(s.train.size() == 4);  // image 999 is not a VQA training image
        bool found = false;
        for (const auto& qa : s.train) found = found || qa.question_id == 50;
        CHECK(found);
    }
    SUBCASE("splits are disjoint and eval ids come from the validation set") {
        DatasetSplits s = build_howmany_splits(in);
        std::set<long long> qids;
        for (const auto* split : {&s.train, &s.dev, &s.test})
            for (const auto& qa : *split) CHECK(qids.insert(qa.question_id).second);
        for (const auto* split : {&s.dev, &s.test})
            for (const auto& qa : *split) {
                CHECK(qa.question_id >= 20);
                CHECK(qa.question_id < 27);
            }
    }
    SUBCASE("manifests pin the partition exactly") {
        in.test_manifest = std::vector<long long>{21, 24};
        DatasetSplits s = build_howmany_splits(in);
        REQUIRE(s.test.size() == 2);
        CHECK(s.test[0].question_id == 21);
        CHECK(s.test[1].question_id == 24);
        CHECK(s.dev.size() == 5);

        in.test_manifest = std::vector<long long>{21, 9999};
        CHECK_THROWS(build_howmany_splits(in));
    }
    SUBCASE("image leakage between train and eval is rejected") {
        in.vqa_val.push_back(raw_qa(30, 100, "How many dogs are there?", "2"));
        in.test_size = 3;
        CHECK_THROWS(build_howmany_splits(in));
    }
    SUBCASE("the seeded draw is deterministic") {
        DatasetSplits a = build_howmany_splits(in);
        DatasetSplits b = build_howmany_splits(in);
        REQUIRE(a.test.size() == b.test.size());
        for (std::size_t i = 0; i < a.test.size(); ++i)
            CHECK(a.test[i].question_id == b.test[i].question_id);
    }
}

TEST_CASE("manifest files") {
    namespace fs = std::filesystem;
    auto path = (fs::temp_directory_path() / "cvqa_manifest.txt").string();
    std::vector<long long> ids{5, 1, 99};
    write_manifest(ids, path);
    CHECK(read_manifest(path) == ids);
}

TEST_CASE("region caption files") {
    namespace fs = std::filesystem;
    auto path = (fs::temp_directory_path() / "cvqa_caps.json").string();
    {
        std::ofstream os(path);
        os << R"([{"image_id": 7, "regions":
                   [{"caption": "a red square", "x": 0.1, "y": 0.2, "width": 0.3, "height": 0.4}]}])";
    }
    auto caps = load_region_captions(path);
    REQUIRE(caps.count("7") == 1);
    REQUIRE(caps["7"].size() == 1);
    CHECK(caps["7"][0].tokens == std::vector<std::string>{"a", "red", "square"});
    CHECK(caps["7"][0].region.x2 == doctest::Approx(0.4));
    CHECK(caps["7"][0].region.y2 == doctest::Approx(0.6));
}

TEST_SUITE_END();
