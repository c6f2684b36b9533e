#pragma once

// word2vec text format: "<count> <dim>" then "<word> <v1> ... <vdim>" per line.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "drpc/corpus.hpp"

namespace drpc {

class EmbeddingFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Pre-trained vectors. Out-of-vocabulary words resolve to an all-zero unk
// vector.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

    void add(const std::string& word, std::vector<double> v) {
        if (v.size() != dim_)
            throw EmbeddingFormatError("vector for '" + word + "' has " + std::to_string(v.size()) +
                                       " values, expected " + std::to_string(dim_));
        if (index_.count(word)) throw EmbeddingFormatError("duplicate word '" + word + "'");
        index_.emplace(word, words_.size());
        words_.push_back(word);
        values_.insert(values_.end(), v.begin(), v.end());
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return words_.size(); }
    const std::vector<std::string>& words() const noexcept { return words_; }
    bool contains(const std::string& w) const { return index_.count(w) != 0; }

    std::vector<double> lookup(const std::string& word) const {
        auto it = index_.find(word);
        if (it == index_.end()) return std::vector<double>(dim_, 0.0);
        const auto* p = values_.data() + it->second * dim_;
        return {p, p + dim_};
    }

    friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
        return a.dim_ == b.dim_ && a.words_ == b.words_ && a.values_ == b.values_;
    }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> words_;
    std::vector<double> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline EmbeddingTable read_embeddings(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw EmbeddingFormatError("empty embedding file");
    std::istringstream header(line);
    std::size_t count = 0, dim = 0;
    if (!(header >> count >> dim) || dim == 0) throw EmbeddingFormatError("bad header line '" + line + "'");
    EmbeddingTable table(dim);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string word, tok;
        fields >> word;
        std::vector<double> v;
        while (fields >> tok) {
            double x = 0;
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
            if (ec != std::errc{} || ptr != tok.data() + tok.size())
                throw EmbeddingFormatError("line " + std::to_string(lineno) + ": bad number '" + tok + "'");
            v.push_back(x);
        }
        if (v.size() != dim)
            throw EmbeddingFormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                                       " values, found " + std::to_string(v.size()));
        table.add(word, std::move(v));
    }
    if (table.size() != count)
        throw EmbeddingFormatError("header declares " + std::to_string(count) + " rows, found " +
                                   std::to_string(table.size()));
    return table;
}

inline EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EmbeddingFormatError("cannot open embedding file " + path);
    return read_embeddings(in);
}

// Shortest decimal form that reads back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

inline void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
    out << table.size() << ' ' << table.dim() << '\n';
    for (const auto& w : table.words()) {
        out << w;
        for (double v : table.lookup(w)) out << ' ' << format_double(v);
        out << '\n';
    }
}

inline void write_embeddings(const std::string& path, const EmbeddingTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EmbeddingFormatError("cannot write embedding file " + path);
    write_embeddings(out, table);
}

}  // namespace drpc
