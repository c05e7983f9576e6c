#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "countvqa/nn.hpp"
#include "countvqa/records.hpp"

namespace cvqa {

/// Lowercase, strip punctuation, split on whitespace.
std::vector<std::string> tokenize(const std::string& text);

/// Token -> index map with reserved padding and unknown slots.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    Vocabulary();

    int add(const std::string& token);           // returns existing index if known
    int lookup(const std::string& token) const;  // kUnk when absent
    std::optional<int> find(const std::string& token) const;

    std::size_t size() const { return words_.size(); }
    const std::string& word(int index) const { return words_[static_cast<std::size_t>(index)]; }

private:
    std::unordered_map<std::string, int> index_;
    std::vector<std::string> words_;
};

/// Word embeddings plus an LSTM read out at the final token.
struct SequenceEncoder {
    Parameter* embeddings = nullptr;  // [|V| x d_emb], shared across encoders
    LstmParams lstm;
    std::size_t d_emb = 0, d_hid = 0;

    /// Final hidden state after feeding the embedded tokens from a zero
    /// initial state. Empty token lists are rejected.
    Var encode(Graph& g, const Vocabulary& vocab, const std::vector<std::string>& tokens) const;
};

/// The shared object-scoring function: one GTU layer over [q, v_i] per
/// object. Counting and caption grounding run through the same parameters.
struct Scorer {
    GtuParams fs;
    std::size_t score_dim = 0;

    /// Scores every object of a scene; returns an [N x n] matrix (N may be 0).
    Var score_objects(Graph& g, Var q, const SceneRecord& scene) const;
};

/// GloVe-format text file: token then d_emb space-separated floats per line.
/// Tokens present in the vocabulary get their rows overwritten; the rest of
/// the table keeps its random initialization. Returns the number of rows
/// loaded.
std::size_t load_glove(const std::string& path, const Vocabulary& vocab, Parameter& embeddings);

}  // namespace cvqa
