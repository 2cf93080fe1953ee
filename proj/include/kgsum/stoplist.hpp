#pragma once

// Stopword and pronoun lists shared by graph node pruning, RAKE phrase
// scoring and the entity/context-word recall metrics. One list feeds all
// three so their notions of "content word" agree.
//
// The defaults below are compiled in; both lists can be replaced by plain
// text files (one token per line, UTF-8, '#' comments allowed).

#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgsum/util.hpp"

namespace kgsum {

inline const std::vector<std::string>& default_stopwords() {
    static const std::vector<std::string> words = {
        "a", "about", "above", "after", "again", "against", "all", "also", "am", "an",
        "and", "any", "are", "aren't", "as", "at", "be", "because", "been", "before",
        "being", "below", "between", "both", "but", "by", "can", "cannot", "could",
        "couldn't", "did", "didn't", "do", "does", "doesn't", "doing", "don't", "down",
        "during", "each", "either", "else", "etc", "ever", "every", "few", "for", "from",
        "further", "had", "hadn't", "has", "hasn't", "have", "haven't", "having", "he",
        "her", "here", "hers", "herself", "him", "himself", "his", "how", "however", "i",
        "if", "in", "into", "is", "isn't", "it", "its", "itself", "just", "let", "may",
        "me", "might", "more", "most", "must", "mustn't", "my", "myself", "neither",
        "never", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
        "other", "ought", "our", "ours", "ourselves", "out", "over", "own", "per",
        "rather", "same", "shall", "shan't", "she", "should", "shouldn't", "since", "so",
        "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves",
        "then", "there", "therefore", "these", "they", "this", "those", "though",
        "through", "thus", "to", "too", "under", "until", "up", "upon", "us", "very",
        "was", "wasn't", "we", "were", "weren't", "what", "when", "where", "whether",
        "which", "while", "who", "whom", "whose", "why", "will", "with", "within",
        "without", "won't", "would", "wouldn't", "yet", "you", "your", "yours",
        "yourself", "yourselves",
    };
    return words;
}

// Closed-class personal / possessive / demonstrative pronouns.
inline const std::vector<std::string>& default_pronouns() {
    static const std::vector<std::string> words = {
        "i", "me", "my", "mine", "myself",
        "we", "us", "our", "ours", "ourselves",
        "you", "your", "yours", "yourself", "yourselves",
        "he", "him", "his", "himself",
        "she", "her", "hers", "herself",
        "it", "its", "itself",
        "they", "them", "their", "theirs", "themselves",
        "this", "that", "these", "those",
        "who", "whom", "whose", "which", "what",
        "one", "ones",
    };
    return words;
}

class Stoplist {
public:
    Stoplist()
        : stopwords_(default_stopwords().begin(), default_stopwords().end()),
          pronouns_(default_pronouns().begin(), default_pronouns().end()) {}

    Stoplist(std::vector<std::string> stopwords, std::vector<std::string> pronouns)
        : stopwords_(stopwords.begin(), stopwords.end()),
          pronouns_(pronouns.begin(), pronouns.end()) {}

    bool is_stopword(const std::string& tok) const { return stopwords_.count(tok) > 0; }
    bool is_pronoun(const std::string& tok) const { return pronouns_.count(tok) > 0; }

    // A mention made up entirely of pronouns/stopwords carries no content.
    bool is_content_word(const std::string& tok) const {
        return !is_stopword(tok) && !is_pronoun(tok);
    }

    std::size_t stopword_count() const { return stopwords_.size(); }
    std::size_t pronoun_count() const { return pronouns_.size(); }

    void load_stopwords(const std::string& path) { stopwords_ = load_word_file(path); }
    void load_pronouns(const std::string& path) { pronouns_ = load_word_file(path); }

    static std::unordered_set<std::string> load_word_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open word list file: " + path);
        std::unordered_set<std::string> out;
        std::string line;
        while (std::getline(in, line)) {
            const std::string word = trim(line);
            if (word.empty() || word[0] == '#') continue;
            out.insert(lowercase(word));
        }
        return out;
    }

    static void write_word_file(const std::string& path, const std::vector<std::string>& words) {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write word list file: " + path);
        for (const auto& w : words) out << w << "\n";
    }

private:
    std::unordered_set<std::string> stopwords_;
    std::unordered_set<std::string> pronouns_;
};

}  // namespace kgsum
