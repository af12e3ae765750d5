#include "gapcoref/synthetic.hpp"

#include <array>
#include <string>

#include "gapcoref/error.hpp"
#include "gapcoref/rng.hpp"

namespace gapcoref {

namespace {

constexpr std::array<const char*, 16> kMaleNames = {"John",  "Peter",  "Henry", "Walter", "George", "Arthur",
                                                    "Oscar", "Victor", "Frank", "Hugo",   "Louis",  "Martin",
                                                    "Simon", "Edward", "Carl",  "Ralph"};
constexpr std::array<const char*, 16> kFemaleNames = {"Mary",  "Alice", "Carol", "Helen",  "Susan", "Laura",
                                                      "Emma",  "Julia", "Grace", "Diana",  "Irene", "Nora",
                                                      "Agnes", "Clara", "Ruth",  "Sylvia"};
constexpr std::array<const char*, 8> kVerbs = {"met",     "called", "visited", "thanked",
                                               "trusted", "hired",  "warned",  "joined"};
constexpr std::array<const char*, 8> kPlaces = {"at the station", "in the library", "near the river",
                                                "after the concert", "in the old town", "during the war",
                                                "at the school", "before the match"};
constexpr std::array<const char*, 6> kOpeners = {"Later", "Soon", "That night", "Afterwards", "Then", "Years later"};
constexpr std::array<const char*, 6> kSubjectTails = {"left the city", "wrote a letter", "sold the farm",
                                                      "won the prize", "moved abroad", "returned home"};
constexpr std::array<const char*, 6> kNouns = {"book", "brother", "house", "career", "garden", "music"};
constexpr std::array<const char*, 4> kObjectHeads = {"Everyone admired", "The press praised", "Critics ignored",
                                                     "The village welcomed"};

template <std::size_t N>
const char* pick(Rng& rng, const std::array<const char*, N>& items) {
  return items[static_cast<std::size_t>(rng.below(N))];
}

}  // namespace

std::vector<GapRecord> synthetic_gap(const SyntheticOptions& options) {
  if (!(options.neither_fraction >= 0.0 && options.neither_fraction < 1.0)) {
    throw Error(ErrorCode::BadConfig, "neither_fraction must lie in [0, 1)");
  }
  Rng rng(derive_seed(options.seed, "synthetic"));
  std::vector<GapRecord> out;
  out.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    const bool female = i % 2 == 1;
    const auto& same = female ? kFemaleNames : kMaleNames;
    const auto& other = female ? kMaleNames : kFemaleNames;
    const bool neither = rng.uniform() < options.neither_fraction;
    const bool gold_a = rng.uniform() < 0.5;

    std::string a_name, b_name, c_name;
    if (neither) {
      a_name = pick(rng, other);
      do b_name = pick(rng, other);
      while (b_name == a_name);
      c_name = pick(rng, same);
    } else if (gold_a) {
      a_name = pick(rng, same);
      b_name = pick(rng, other);
    } else {
      a_name = pick(rng, other);
      b_name = pick(rng, same);
    }

    GapRecord r;
    r.id = "synth-" + std::to_string(i + 1);
    r.url = "http://example.org/synthetic/" + std::to_string(i + 1);
    std::string text;
    r.a_offset = 0;
    text += a_name;
    text += ' ';
    text += pick(rng, kVerbs);
    text += ' ';
    r.b_offset = static_cast<std::int64_t>(text.size());
    text += b_name;
    text += ' ';
    text += pick(rng, kPlaces);
    text += ". ";
    if (neither) {
      text += c_name + " arrived " + pick(rng, kPlaces) + ". ";
    }

    const int form = static_cast<int>(rng.below(3));
    if (form == 0) {
      text += pick(rng, kOpeners);
      text += ", ";
      r.pronoun = female ? "she" : "he";
      r.pronoun_offset = static_cast<std::int64_t>(text.size());
      text += r.pronoun + " " + pick(rng, kSubjectTails) + ".";
    } else if (form == 1) {
      text += pick(rng, kOpeners);
      text += ", ";
      r.pronoun = female ? "her" : "his";
      r.pronoun_offset = static_cast<std::int64_t>(text.size());
      text += r.pronoun + " " + pick(rng, kNouns) + " became famous.";
    } else {
      text += pick(rng, kObjectHeads);
      text += ' ';
      r.pronoun = female ? "her" : "him";
      r.pronoun_offset = static_cast<std::int64_t>(text.size());
      text += r.pronoun + ".";
    }

    r.text = std::move(text);
    r.a_name = a_name;
    r.b_name = b_name;
    r.a_coref = !neither && gold_a;
    r.b_coref = !neither && !gold_a;
    validate_record(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace gapcoref
