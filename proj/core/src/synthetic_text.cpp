// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "resprobe/corpus.hpp"

namespace resprobe {

namespace {

using Words = std::vector<std::string_view>;

const Words kPeople = {"the old man", "the girl", "my mother", "the captain", "the young doctor", "his brother",
                       "the farmer", "the teacher", "her father", "the stranger", "the little boy", "the widow"};
const Words kPronounSubj = {"he", "she", "they", "we", "I"};
const Words kNames = {"Anna", "Thomas", "Margaret", "John", "Elizabeth", "Henry", "Mary", "Charles", "Alice", "Peter"};
const Words kAdjectives = {"quiet", "dark", "cold", "warm", "empty", "old", "strange", "small", "bright", "heavy",
                           "dusty", "silent", "narrow", "broken", "gentle", "tired", "happy", "angry", "pale", "wet"};
const Words kDegree = {"very", "quite", "rather", "so", "too", "almost"};
const Words kNouns = {"book", "letter", "door", "window", "table", "lamp", "box", "coat", "chair", "ring", "key",
                      "basket", "bottle", "picture", "knife", "candle"};
const Words kPlaces = {"house", "street", "garden", "river", "church", "village", "kitchen", "library", "forest",
                       "station", "market", "hill", "road", "room", "shop", "harbour"};
const Words kPlural = {"children", "students", "men", "women", "soldiers", "sailors", "travellers", "neighbours"};
const Words kTransitive = {"opened", "closed", "found", "carried", "lifted", "dropped", "cleaned", "painted",
                           "watched", "touched", "held", "hid"};
const Words kMotion = {"walked", "ran", "hurried", "wandered", "drove", "rode", "climbed", "crept"};
const Words kPrep = {"in", "near", "behind", "across", "beside", "under", "outside", "through", "along"};
const Words kTime = {"that morning", "in the evening", "at night", "after dinner", "before dawn", "on Sunday",
                     "the next day", "for a long time", "at once", "again"};
const Words kSpeech = {"Come here", "I know", "Wait for me", "It is late", "Look at this", "Not now",
                       "Where are you going", "Thank you", "Listen", "Be careful"};
const Words kStates = {"late", "early", "lost", "alone", "afraid", "ready", "wrong", "tired"};
const Words kCloud = {"dust", "smoke", "mist", "steam", "ash"};
const Words kRelatives = {"mother", "father", "friend", "sister", "brother", "doctor", "husband", "wife"};
const Words kViewAdj = {"breathtaking", "spectacular", "beautiful", "distant", "wide", "green", "grey"};
const Words kViews = {"view", "valley", "sea", "mountains", "sky", "sunset", "lake"};
const Words kBe = {"was", "seemed", "looked", "felt"};

class Generator {
public:
    explicit Generator(std::uint64_t seed) : rng_(seed) {}

    std::string_view pick(const Words& w) {
        return w[std::uniform_int_distribution<std::size_t>(0, w.size() - 1)(rng_)];
    }
    bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
    std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

    std::string subject() {
        const std::size_t k = below(3);
        if (k == 0) return std::string(pick(kPeople));
        if (k == 1) return std::string(pick(kPronounSubj));
        return std::string(pick(kNames));
    }

    std::string sentence() {
        std::string s;
        auto add = [&s](std::string_view w) { s += w; };
        switch (below(10)) {
            case 0:
                add("the "); add(pick(kPlaces)); add(" at the end of the "); add(pick(kPlaces)); add(" "); add(pick(kBe));
                add(" "); add(pick(kDegree)); add(" "); add(pick(kAdjectives));
                break;
            case 1:
                add(subject()); add(" "); add(pick(kTransitive)); add(" the "); add(pick(kAdjectives)); add(" ");
                add(pick(kNouns)); add(" "); add(pick(kPrep)); add(" the "); add(pick(kPlaces));
                break;
            case 2:
                add(subject()); add(" opened the "); add(pick(kAdjectives)); add(" "); add(pick(kNouns));
                add(" and a cloud of "); add(pick(kCloud)); add(" rose into the air");
                break;
            case 3:
                add(subject()); add(" suddenly looked at the clock and realized it was "); add(pick(kStates));
                break;
            case 4:
                add("and then "); add(subject()); add(" picked up the phone to call "); add(coin(0.5) ? "her " : "his ");
                add(pick(kRelatives));
                break;
            case 5:
                add("in the "); add(pick(kAdjectives)); add(" "); add(pick(kPlaces)); add(", "); add(pick(kPlural));
                add(" "); add(pick(kMotion)); add(" "); add(pick(kTime));
                break;
            case 6:
                add("the "); add(pick(kPlural)); add(" reached the "); add(pick(kPlaces)); add(" and admired the ");
                add(pick(kViewAdj)); add(" "); add(pick(kViews));
                break;
            case 7: {
                s += "\"";
                add(pick(kSpeech));
                s += coin(0.3) ? "!\" " : ",\" ";
                add("said "); add(pick(kNames));
                break;
            }
            case 8:
                add(subject()); add(" "); add(pick(kMotion)); add(" "); add(pick(kPrep)); add(" the ");
                add(pick(kPlaces)); add(" "); add(pick(kTime));
                break;
            default:
                add(subject()); add(" "); add(pick(kBe)); add(" "); add(pick(kAdjectives)); add(" and ");
                add(pick(kAdjectives)); add(", but "); add(pick(kPronounSubj)); add(" said nothing");
                break;
        }
        if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
        if (s.back() != ' ' && s.back() != '"') s += coin(0.15) ? "!" : (coin(0.1) ? "?" : ".");
        return s;
    }

private:
    std::mt19937_64 rng_;
};

}  // namespace

std::string synthetic_text(std::size_t approx_chars, std::uint64_t seed) {
    Generator gen(seed);
    std::string out;
    out.reserve(approx_chars + 256);
    std::size_t in_paragraph = 0;
    const auto paragraph_len = [&gen] { return 3 + gen.below(6); };
    std::size_t target = paragraph_len();
    while (out.size() < approx_chars) {
        if (in_paragraph > 0) out += ' ';
        out += gen.sentence();
        if (++in_paragraph == target) {
            out += "\n\n";
            in_paragraph = 0;
            target = paragraph_len();
        }
    }
    return out;
}

}  // namespace resprobe
