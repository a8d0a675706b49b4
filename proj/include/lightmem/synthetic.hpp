#pragma once
// Seeded synthetic corpora: planted personal facts with lexically similar
// distractors, plus general-knowledge facts from a provider account.

#include <random>
#include <set>

#include "lightmem/text.hpp"

namespace lightmem::synth {

struct Fact {
    std::string statement;  // written to memory
    std::string query;      // asks for it
    std::string subject;
    std::string attribute;
    std::string value;
    bool personal = true;
};

inline const std::vector<std::string>& relations() {
    static const std::vector<std::string> k = {"friend", "sister", "brother", "cousin",   "boss",   "neighbor",
                                               "coworker", "uncle", "aunt",   "roommate", "mentor", "teacher"};
    return k;
}

inline const std::vector<std::string>& names() {
    static const std::vector<std::string> k = {
        "maya",  "leo",    "nina",   "omar",  "ivy",    "theo",   "zara",   "felix", "ruby",  "hugo",  "lena",
        "otto",  "clara",  "amir",   "iris",  "jonas",  "mila",   "ravi",   "sofia", "emil",  "nora",  "dario",
        "elsa",  "kai",    "luca",   "vera",  "beno",   "cora",   "ezra",   "gina",  "hans",  "ines",  "jude",
        "kira",  "lars",   "mira",   "nico",  "olga",   "pablo",  "quinn",  "rosa",  "sven",  "tara",  "ugo",
        "vito",  "wanda",  "xena",   "yara",  "zeno",   "alba",   "bruno",  "cyra",  "dina",  "elio",  "fern",
        "gus",   "hedda",  "ilan",   "jana",  "kofi"};
    return k;
}

inline const std::vector<std::string>& personal_attributes() {
    static const std::vector<std::string> k = {
        "favorite city",   "favorite food",   "favorite color", "favorite band",   "favorite book",
        "favorite sport",  "favorite movie",  "favorite drink", "dream car",       "pet's name",
        "hometown",        "middle name",     "favorite game",  "favorite season", "favorite flower",
        "favorite artist", "favorite dessert", "favorite song", "favorite animal", "favorite hobby"};
    return k;
}

inline const std::vector<std::string>& general_attributes() {
    static const std::vector<std::string> k = {"capital", "currency", "official language", "most famous dish",
                                               "most popular sport", "population"};
    return k;
}

/// Pronounceable nonsense words: unique values that share no vocabulary with
/// the templates.
class WordMaker {
public:
    explicit WordMaker(std::uint64_t seed) : rng_(seed) {}

    std::string word() {
        static const char* kOnset[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                       "br", "dr", "kl", "pr", "st", "tr", "sk", "gl"};
        static const char* kNucleus[] = {"a", "e", "i", "o", "u", "ae", "ou", "ia"};
        static const char* kCoda[] = {"", "n", "r", "k", "x", "l", "s", "m"};
        int syll = 2 + static_cast<int>(rng_() % 2);
        std::string w;
        for (int i = 0; i < syll; ++i) {
            w += kOnset[rng_() % std::size(kOnset)];
            w += kNucleus[rng_() % std::size(kNucleus)];
        }
        w += kCoda[rng_() % std::size(kCoda)];
        return w;
    }

    std::string phrase(std::size_t min_words, std::size_t max_words) {
        std::size_t n = min_words + rng_() % (max_words - min_words + 1);
        std::vector<std::string> w;
        for (std::size_t i = 0; i < n; ++i) w.push_back(word());
        return text::join(w);
    }

    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline Fact personal_fact(const std::string& rel, const std::string& name, const std::string& attr,
                          const std::string& value) {
    Fact f;
    f.subject = "my " + rel + " " + name;
    f.attribute = attr;
    f.value = value;
    f.statement = f.subject + "'s " + attr + " is " + value;
    f.query = "what is " + f.subject + "'s " + attr;
    f.personal = true;
    return f;
}

inline Fact general_fact(const std::string& place, const std::string& attr, const std::string& value) {
    Fact f;
    f.subject = place;
    f.attribute = attr;
    f.value = value;
    f.statement = "the " + attr + " of " + place + " is " + value;
    f.query = "what is the " + attr + " of " + place;
    f.personal = false;
    return f;
}

struct PersonalSpace {
    std::size_t relations = 12;
    std::size_t names = 60;
    std::size_t attributes = 20;
    std::size_t min_value_words = 1;
    std::size_t max_value_words = 6;
};

/// `count` distinct personal facts, in random order. Every (subject,
/// attribute) occurs once and every value is unique, so no two statements
/// differ in a single slot.
inline std::vector<Fact> personal_facts(std::size_t count, std::uint64_t seed, const PersonalSpace& sp = {}) {
    std::size_t nr = std::min(sp.relations, relations().size());
    std::size_t nn = std::min(sp.names, names().size());
    std::size_t na = std::min(sp.attributes, personal_attributes().size());
    std::size_t space = nr * nn * na;
    if (count > space) throw std::invalid_argument("personal_facts: count exceeds the fact space");
    WordMaker wm(seed);
    std::vector<std::size_t> slots(space);
    for (std::size_t i = 0; i < space; ++i) slots[i] = i;
    for (std::size_t i = 0; i < count; ++i) std::swap(slots[i], slots[i + wm.rng()() % (space - i)]);
    std::set<std::string> used;
    std::vector<Fact> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto s = slots[i];
        const auto& rel = relations()[s % nr];
        const auto& name = names()[(s / nr) % nn];
        const auto& attr = personal_attributes()[s / (nr * nn)];
        std::string v;
        do v = wm.phrase(sp.min_value_words, sp.max_value_words);
        while (!used.insert(v).second);
        out.push_back(personal_fact(rel, name, attr, v));
    }
    return out;
}

inline std::vector<Fact> general_facts(std::size_t places, std::uint64_t seed) {
    WordMaker wm(seed ^ 0x5bd1e995ULL);
    std::set<std::string> used;
    std::vector<Fact> out;
    for (std::size_t p = 0; p < places; ++p) {
        std::string place;
        do place = wm.word() + "ia";
        while (!used.insert(place).second);
        for (const auto& a : general_attributes()) {
            std::string v;
            do v = wm.phrase(1, 2);
            while (!used.insert(v).second);
            out.push_back(general_fact(place, a, v));
        }
    }
    return out;
}

inline std::string noise_string(WordMaker& wm, std::size_t min_words = 6, std::size_t max_words = 10) {
    return wm.phrase(min_words, max_words);
}

}  // namespace lightmem::synth
