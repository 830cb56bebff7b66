#pragma once

#include <string_view>

namespace hs::text {

/// Starter word-polarity lexicon (word<TAB>polarity), same content as data/lexicon.tsv.
inline constexpr std::string_view kStarterLexicon =
    "joke\t1\n"
    "funny\t1\n"
    "laughing\t1\n"
    "like\t1\n"
    "oneday\t1\n"
    "someday\t1\n"
    "joy\t1\n"
    "happy\t1\n"
    "love\t1\n"
    "great\t1\n"
    "good\t1\n"
    "smile\t1\n"
    "excited\t1\n"
    "grateful\t1\n"
    "calm\t1\n"
    "hope\t1\n"
    "peaceful\t1\n"
    "wonderful\t1\n"
    "fun\t1\n"
    "proud\t1\n"
    "relaxed\t1\n"
    "blessed\t1\n"
    "glad\t1\n"
    "enjoy\t1\n"
    "awesome\t1\n"
    "dying\t-1\n"
    "depressed\t-1\n"
    "suicide\t-1\n"
    "die\t-1\n"
    "sad\t-1\n"
    "depression\t-1\n"
    "anxiety\t-1\n"
    "anxious\t-1\n"
    "lonely\t-1\n"
    "cry\t-1\n"
    "tired\t-1\n"
    "hopeless\t-1\n"
    "pain\t-1\n"
    "hurt\t-1\n"
    "afraid\t-1\n"
    "empty\t-1\n"
    "worthless\t-1\n"
    "stress\t-1\n"
    "upset\t-1\n"
    "miserable\t-1\n"
    "broken\t-1\n"
    "the\t0\n"
    "is\t0\n"
    "so\t0\n"
    "i\t0\n"
    "am\t0\n"
    "will\t0\n"
    "no\t0\n"
    "not\t0\n"
    "never\t0\n"
    "none\t0\n"
    "neither\t0\n"
    "mental\t0\n"
    "health\t0\n"
    "today\t0\n"
    ;

}  // namespace hs::text
