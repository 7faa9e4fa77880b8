// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

// Word lists for tag normalisation. The stop words are the 179-entry
// English list distributed with NLTK.

#pragma once

#include <array>
#include <string_view>
#include <utility>

namespace coala::tag_tables {

inline constexpr std::array<std::string_view, 179> kStopWords{
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're",
    "you've", "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his",
    "himself", "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself",
    "they", "them", "their", "theirs", "themselves", "what", "which", "who", "whom", "this",
    "that", "that'll", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing",
    "a", "an", "the", "and", "but", "if", "or", "because", "as", "until",
    "while", "of", "at", "by", "for", "with", "about", "against", "between", "into",
    "through", "during", "before", "after", "above", "below", "to", "from", "up", "down",
    "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each",
    "few", "more", "most", "other", "some", "such", "no", "nor", "not", "only",
    "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
    "just", "don", "don't", "should", "should've", "now", "d", "ll", "m", "o",
    "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn", "didn't",
    "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn", "isn't",
    "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't", "shouldn",
    "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn", "wouldn't",
};

inline constexpr std::array<std::pair<std::string_view, std::string_view>, 28> kIrregularPlurals{{
    {"men", "man"},           {"women", "woman"},        {"children", "child"},
    {"feet", "foot"},         {"teeth", "tooth"},        {"geese", "goose"},
    {"mice", "mouse"},        {"lice", "louse"},         {"people", "person"},
    {"oxen", "ox"},           {"indices", "index"},      {"matrices", "matrix"},
    {"vertices", "vertex"},   {"analyses", "analysis"},  {"crises", "crisis"},
    {"theses", "thesis"},     {"phenomena", "phenomenon"}, {"criteria", "criterion"},
    {"cacti", "cactus"},      {"fungi", "fungus"},       {"radii", "radius"},
    {"stimuli", "stimulus"},  {"quizzes", "quiz"},       {"dice", "die"},
    {"firemen", "fireman"},   {"policemen", "policeman"}, {"fishermen", "fisherman"},
    {"synopses", "synopsis"},
}};

// Nouns whose plural equals the singular, or that only look plural.
inline constexpr std::array<std::string_view, 32> kInvariantNouns{
    "sheep",    "fish",     "deer",      "series",      "species",   "news",
    "aircraft", "moose",    "swine",     "bison",       "salmon",    "trout",
    "shrimp",   "physics",  "mathematics", "electronics", "acoustics", "economics",
    "athletics", "gymnastics", "politics", "ethics",     "lens",      "canvas",
    "chaos",    "atlas",    "bias",      "christmas",   "headquarters", "means",
    "scissors", "pants",
};

inline constexpr std::array<std::pair<std::string_view, std::string_view>, 17> kVesToF{{
    {"leaves", "leaf"},   {"wolves", "wolf"},   {"knives", "knife"},  {"wives", "wife"},
    {"lives", "life"},    {"halves", "half"},   {"shelves", "shelf"}, {"calves", "calf"},
    {"loaves", "loaf"},   {"thieves", "thief"}, {"selves", "self"},   {"elves", "elf"},
    {"scarves", "scarf"}, {"hooves", "hoof"},   {"wharves", "wharf"}, {"sheaves", "sheaf"},
    {"midwives", "midwife"},
}};

// Singulars ending in -ie, so -ies only drops the s.
inline constexpr std::array<std::string_view, 16> kIeNouns{
    "movie", "cookie", "zombie", "rookie", "hippie", "prairie", "calorie", "brownie",
    "genie", "pixie",  "selfie", "smoothie", "goalie", "auntie", "birdie", "boogie",
};

// Singulars ending in -che, so -ches only drops the s.
inline constexpr std::array<std::string_view, 8> kCheNouns{
    "ache", "headache", "cache", "niche", "avalanche", "moustache", "microfiche", "psyche",
};

// -ses / -zes / -oes plurals that drop -es; every other word with those
// endings drops only the s (houses, noises, prizes, shoes).
inline constexpr std::array<std::string_view, 24> kEsPlurals{
    "buses",    "gases",     "lenses",    "viruses",   "choruses",  "bonuses",
    "circuses", "campuses",  "canvases",  "atlases",   "biases",    "irises",
    "octopuses", "walruses", "potatoes",  "tomatoes",  "echoes",    "heroes",
    "volcanoes", "mosquitoes", "torpedoes", "vetoes",  "cargoes",   "buzzes",
};

}  // namespace coala::tag_tables
