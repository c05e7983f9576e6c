#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "countvqa/records.hpp"
#include "countvqa/rng.hpp"

namespace cvqa {

// ---- HowMany filter ----

enum class FilterReason { KEEP, NO_PHRASE, REJECT_PHRASE, NON_NUMERIC, OUT_OF_RANGE };

const char* filter_reason_name(FilterReason r);

/// Parses a count answer: digit strings or the words "zero".."twenty".
std::optional<int> parse_count_answer(const std::string& answer);

/// Keep iff the question contains a counting phrase, does not contain
/// "number of the", and the answer is an integer in [0, 20]. Matching is
/// lowercase substring over the space-joined tokens.
FilterReason filter_howmany(const std::string& question, const std::string& answer);

// ---- subject extraction and frequency bins ----

inline const std::string kUnknownSubject = "UNKNOWN";

/// Heuristic stand-in for noun-chunk parsing: the first token after the
/// count phrase that is not a stop word, with its plural suffix stripped.
std::string extract_subject(const std::vector<std::string>& tokens);

std::string strip_plural(const std::string& word);

/// Partitions eval questions into 5 roughly equal bins by the training
/// frequency of their subject (bin 1 = most frequent) and bin 6 for
/// subjects never seen in training. Writes QARecord::bin.
void assign_frequency_bins(const std::vector<QARecord>& train, std::vector<QARecord>& eval_split);

// ---- VQA-format ingestion ----

/// One question joined to its annotation, prior to filtering.
struct RawQA {
    long long question_id = 0;
    long long image_id = 0;
    std::string question;
    std::string consensus_answer;
    std::vector<std::string> human_answers;
};

/// Joins a VQA 2.0 questions file to its annotations file by question id.
/// Missing annotations are an error; questions whose answer list is not
/// exactly 10 long are excluded with a warning (collected in `warnings`).
std::vector<RawQA> load_vqa_annotations(const std::string& questions_file,
                                        const std::string& annotations_file,
                                        std::vector<std::string>* warnings = nullptr);

/// Converts a kept RawQA into a QARecord (tokens, subject, consensus count).
QARecord make_qa_record(const RawQA& raw);

// ---- splits ----

struct DatasetSplits {
    std::vector<QARecord> train, dev, test;
};

struct SplitInputs {
    std::vector<RawQA> vqa_train;
    std::vector<RawQA> vqa_val;
    std::vector<RawQA> vg_train;  // joined against VQA train images upstream
    std::vector<long long> vqa_train_image_ids;  // for the VG image restriction
    // Optional published manifests (question ids); when absent a seeded
    // uniform draw selects the test questions.
    std::optional<std::vector<long long>> dev_manifest;
    std::optional<std::vector<long long>> test_manifest;
    std::size_t test_size = 5000;
    std::uint64_t seed = 1;
};

/// Applies the filter, merges VG pairs restricted to VQA-train images,
/// partitions the filtered validation set into dev/test, assigns subjects
/// and frequency bins, and rejects image leakage between train and eval.
DatasetSplits build_howmany_splits(const SplitInputs& in);

/// Newline-delimited question-id manifest files.
std::vector<long long> read_manifest(const std::string& path);
void write_manifest(const std::vector<long long>& ids, const std::string& path);

// ---- region captions ----

/// Region-caption file: per image, a list of (caption text, x, y, width,
/// height) records. Returns image id -> captions (boxes in corner form).
std::map<std::string, std::vector<CaptionRecord>> load_region_captions(const std::string& path);

}  // namespace cvqa
