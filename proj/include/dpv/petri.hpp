#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dpv/util.hpp"

namespace dpv {

// Place/transition net with marking vectors (token count per place).
// Transitions with an empty label are silent.
struct PetriNet {
  struct Transition {
    std::string label;       // "" = silent
    std::vector<int> pre;    // input place indices
    std::vector<int> post;   // output place indices
  };

  int num_places = 0;
  std::vector<Transition> transitions;
  std::vector<int> initial;  // marking, size num_places
  std::vector<int> final;    // marking, size num_places

  bool enabled(const std::vector<int>& marking, std::size_t t) const {
    std::map<int, int> need;
    for (int p : transitions[t].pre) ++need[p];
    for (auto [p, k] : need)
      if (marking[static_cast<std::size_t>(p)] < k) return false;
    return true;
  }

  std::vector<int> fire(std::vector<int> marking, std::size_t t) const {
    for (int p : transitions[t].pre) --marking[static_cast<std::size_t>(p)];
    for (int p : transitions[t].post) ++marking[static_cast<std::size_t>(p)];
    return marking;
  }

  bool is_silent(std::size_t t) const { return transitions[t].label.empty(); }
};

// All distinct visible words of firing sequences from the initial to the
// final marking, up to max_len visible events. Throws when the explored
// state count exceeds `state_cap`.
inline std::set<std::vector<std::string>> language(const PetriNet& net, std::size_t max_len,
                                                   std::size_t state_cap = 1000000) {
  std::set<std::vector<std::string>> words;
  using State = std::pair<std::vector<int>, std::vector<std::string>>;
  std::set<State> seen;
  std::deque<State> queue;
  queue.push_back({net.initial, {}});
  seen.insert(queue.front());
  std::size_t explored = 0;
  while (!queue.empty()) {
    auto [marking, word] = queue.front();
    queue.pop_front();
    if (++explored > state_cap)
      throw StageError("language: state cap of " + std::to_string(state_cap) + " exceeded");
    if (marking == net.final) words.insert(word);
    for (std::size_t t = 0; t < net.transitions.size(); ++t) {
      if (!net.enabled(marking, t)) continue;
      std::vector<std::string> next_word = word;
      if (!net.is_silent(t)) {
        if (word.size() >= max_len) continue;
        next_word.push_back(net.transitions[t].label);
      }
      State next{net.fire(marking, t), std::move(next_word)};
      if (seen.insert(next).second) queue.push_back(std::move(next));
    }
  }
  return words;
}

}  // namespace dpv
