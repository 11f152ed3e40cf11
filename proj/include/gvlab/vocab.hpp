#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace gvlab {

// Fixed synthetic vocabulary. yes_set / no_set hold the answer-token variants
// the validator is read through; the canonical variant sits at index 0 of
// each set.
struct Vocab {
    std::vector<std::string> tokens;
    int bos_id = -1;
    int pad_id = -1;
    std::vector<int> yes_set;
    std::vector<int> no_set;

    int size() const { return static_cast<int>(tokens.size()); }

    int add(const std::string& tok) {
        if (index_.count(tok)) throw std::invalid_argument("vocab: duplicate token \"" + tok + "\"");
        tokens.push_back(tok);
        index_[tok] = size() - 1;
        return size() - 1;
    }

    bool contains(const std::string& tok) const { return index_.count(tok) > 0; }

    int id(const std::string& tok) const {
        auto it = index_.find(tok);
        if (it == index_.end()) throw std::invalid_argument("vocab: unknown token \"" + tok + "\"");
        return it->second;
    }

    const std::string& token(int id) const { return tokens.at(static_cast<size_t>(id)); }

    int canonical_yes() const { return yes_set.at(0); }
    int canonical_no() const { return no_set.at(0); }

    void rebuild_index() {
        index_.clear();
        for (int i = 0; i < size(); ++i) index_[tokens[static_cast<size_t>(i)]] = i;
    }

private:
    std::unordered_map<std::string, int> index_;
};

}  // namespace gvlab
