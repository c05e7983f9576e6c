#include "countvqa/language.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace cvqa {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Vocabulary::Vocabulary() {
    words_ = {"<pad>", "<unk>"};
    index_["<pad>"] = kPad;
    index_["<unk>"] = kUnk;
}

int Vocabulary::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(words_.size());
    words_.push_back(token);
    index_[token] = id;
    return id;
}

int Vocabulary::lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

std::optional<int> Vocabulary::find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Var SequenceEncoder::encode(Graph& g, const Vocabulary& vocab,
                            const std::vector<std::string>& tokens) const {
    detail::require(!tokens.empty(), "encode: empty token list");
    Var emb = g.param(*embeddings);
    Var h = g.input(Tensor({d_hid}));
    Var c = g.input(Tensor({d_hid}));
    for (const auto& tok : tokens) {
        Var x = g.row(emb, static_cast<std::size_t>(vocab.lookup(tok)));
        auto [h2, c2] = lstm_step(g, x, h, c, lstm);
        h = h2;
        c = c2;
    }
    return h;
}

Var Scorer::score_objects(Graph& g, Var q, const SceneRecord& scene) const {
    std::size_t n = scene.object_count();
    if (n == 0) return g.input(Tensor({0, score_dim}));
    Var feats = g.input(scene.features);
    Var x = g.hconcat(g.tile_rows(q, n), feats);
    return gtu_rows(g, x, fs);
}

std::size_t load_glove(const std::string& path, const Vocabulary& vocab, Parameter& embeddings) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("glove: cannot open " + path);
    std::size_t d = embeddings.value.cols();
    std::size_t loaded = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        auto idx = vocab.find(token);
        std::vector<double> row(d);
        for (std::size_t j = 0; j < d; ++j) {
            if (!(ss >> row[j]))
                throw std::runtime_error("glove: line " + std::to_string(line_no) +
                                         ": expected " + std::to_string(d) + " floats");
        }
        if (!idx) continue;
        for (std::size_t j = 0; j < d; ++j)
            embeddings.value.at(static_cast<std::size_t>(*idx), j) = row[j];
        ++loaded;
    }
    return loaded;
}

}  // namespace cvqa
