#include "kinfuse/pfqa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

namespace kinfuse::pfqa {

std::string_view question_type_name(QuestionType t) {
  switch (t) {
    case QuestionType::Parent: return "parent";
    case QuestionType::Grandparent: return "grandparent";
    case QuestionType::Sibling: return "sibling";
  }
  return "parent";
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string first_name(std::string_view full_name) {
  auto parts = text::split_whitespace(full_name);
  return parts.empty() ? std::string() : parts.front();
}

std::string parent_sentence(std::string_view child, std::string_view parent) {
  return "The parent of " + std::string(child) + " is " + std::string(parent) + ".";
}

std::vector<std::string> select_distractors(std::string_view gold, const std::vector<std::string>& pool,
                                            std::size_t count, std::uint64_t seed,
                                            const std::set<std::string, std::less<>>& exclude) {
  std::vector<std::string> unique(pool.begin(), pool.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::map<std::size_t, std::vector<std::string>> tiers;
  std::size_t available = 0;
  for (auto& name : unique) {
    if (name == gold || exclude.contains(name)) continue;
    tiers[edit_distance(gold, name)].push_back(name);
    ++available;
  }
  if (available < count) {
    throw ValidationError("name pool has " + std::to_string(available) + " candidate distractors for '" +
                          std::string(gold) + "', need " + std::to_string(count));
  }
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (auto& [dist, names] : tiers) {
    std::shuffle(names.begin(), names.end(), rng);
    for (auto& n : names) {
      if (out.size() == count) break;
      out.push_back(n);
    }
    if (out.size() == count) break;
  }
  return out;
}

namespace {

using NameSet = std::set<std::string, std::less<>>;

struct FamilyGraph {
  std::map<std::string, NameSet, std::less<>> parents;
  std::map<std::string, NameSet, std::less<>> children;
  NameSet persons;

  explicit FamilyGraph(const std::vector<ParentFact>& facts) {
    for (const auto& f : facts) {
      parents[f.child].insert(f.parent);
      children[f.parent].insert(f.child);
      persons.insert(f.child);
      persons.insert(f.parent);
    }
  }

  const NameSet& parents_of(const std::string& p) const {
    static const NameSet empty;
    auto it = parents.find(p);
    return it == parents.end() ? empty : it->second;
  }
  const NameSet& children_of(const std::string& p) const {
    static const NameSet empty;
    auto it = children.find(p);
    return it == children.end() ? empty : it->second;
  }

  NameSet answers(const std::string& p, QuestionType t) const {
    NameSet out;
    switch (t) {
      case QuestionType::Parent:
        out = parents_of(p);
        break;
      case QuestionType::Grandparent:
        for (const auto& q : parents_of(p)) {
          for (const auto& g : parents_of(q)) out.insert(g);
        }
        break;
      case QuestionType::Sibling:
        for (const auto& q : parents_of(p)) {
          for (const auto& s : children_of(q)) out.insert(s);
        }
        break;
    }
    out.erase(p);
    return out;
  }

  // Parent facts sufficient to derive `answer` for (p, t).
  std::vector<std::string> support(const std::string& p, QuestionType t, const std::string& answer) const {
    std::set<std::pair<std::string, std::string>> facts;  // (child, parent)
    for (const auto& q : parents_of(p)) {
      switch (t) {
        case QuestionType::Parent:
          if (q == answer) facts.insert({p, q});
          break;
        case QuestionType::Grandparent:
          if (parents_of(q).contains(answer)) {
            facts.insert({p, q});
            facts.insert({q, answer});
          }
          break;
        case QuestionType::Sibling:
          if (children_of(q).contains(answer)) {
            facts.insert({p, q});
            facts.insert({answer, q});
          }
          break;
      }
    }
    std::vector<std::string> out;
    for (const auto& [c, par] : facts) out.push_back(parent_sentence(c, par));
    return out;
  }
};

std::string question_text(const std::string& person, QuestionType t) {
  return "Who is the " + std::string(question_type_name(t)) + " of " + person + "?";
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view a, std::string_view b) {
  return text::fnv1a(b, text::fnv1a(a, seed ^ 0x9E3779B97F4A7C15ULL));
}

}  // namespace

std::vector<PfqaQuestion> generate_questions(const std::vector<ParentFact>& facts, std::uint64_t seed) {
  for (const auto& f : facts) {
    if (f.child.empty() || f.parent.empty()) throw ValidationError("parent fact with empty name");
    if (f.child == f.parent) throw ValidationError("person '" + f.child + "' listed as own parent");
  }
  FamilyGraph graph(facts);

  std::vector<std::string> pool;
  for (const auto& p : graph.persons) pool.push_back(first_name(p));
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  std::vector<PfqaQuestion> out;
  for (const auto& person : graph.persons) {
    for (auto t : {QuestionType::Parent, QuestionType::Grandparent, QuestionType::Sibling}) {
      auto answers = graph.answers(person, t);
      if (answers.empty()) continue;
      std::mt19937_64 rng(mix_seed(seed, person, question_type_name(t)));
      std::vector<std::string> answer_list(answers.begin(), answers.end());
      std::uniform_int_distribution<std::size_t> pick(0, answer_list.size() - 1);
      const std::string gold_full = answer_list[pick(rng)];
      const std::string gold = first_name(gold_full);

      NameSet exclude;
      for (const auto& a : answer_list) exclude.insert(first_name(a));
      std::vector<std::string> distractors;
      try {
        distractors = select_distractors(gold, pool, 3, rng(), exclude);
      } catch (const ValidationError&) {
        continue;
      }

      PfqaQuestion q;
      q.person = person;
      q.qtype = t;
      q.question = question_text(person, t);
      q.gold_full_name = gold_full;
      q.options = distractors;
      std::uniform_int_distribution<std::size_t> slot(0, 3);
      q.gold = slot(rng);
      q.options.insert(q.options.begin() + static_cast<std::ptrdiff_t>(q.gold), gold);
      std::set<std::string> knowledge;
      for (const auto& a : answer_list) {
        for (auto& k : graph.support(person, t, a)) knowledge.insert(std::move(k));
      }
      q.knowledge.assign(knowledge.begin(), knowledge.end());
      out.push_back(std::move(q));
    }
  }
  return out;
}

Splits assign_splits(const std::vector<PfqaQuestion>& questions, std::array<double, 3> ratios, std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ValidationError("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");

  std::vector<std::string> persons;
  for (const auto& q : questions) persons.push_back(q.person);
  std::sort(persons.begin(), persons.end());
  persons.erase(std::unique(persons.begin(), persons.end()), persons.end());
  std::mt19937_64 rng(seed);
  std::shuffle(persons.begin(), persons.end(), rng);

  const auto n = static_cast<double>(persons.size());
  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * n));
  const auto n_dev = std::min(persons.size() - n_train, static_cast<std::size_t>(std::llround(ratios[1] * n)));
  std::map<std::string, int, std::less<>> split_of;
  for (std::size_t i = 0; i < persons.size(); ++i) {
    split_of[persons[i]] = i < n_train ? 0 : (i < n_train + n_dev ? 1 : 2);
  }

  Splits s;
  for (const auto& q : questions) {
    switch (split_of[q.person]) {
      case 0: s.train.push_back(q); break;
      case 1: s.dev.push_back(q); break;
      default: s.test.push_back(q); break;
    }
  }
  return s;
}

std::vector<ParentFact> parse_facts(std::string_view contents, std::string_view origin) {
  std::vector<ParentFact> facts;
  auto lines = io::split_lines(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (text::normalize_whitespace(line).empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ValidationError(std::string(origin) + ":" + std::to_string(i + 1) + ": expected child<TAB>parent");
    }
    ParentFact f{text::normalize_whitespace(line.substr(0, tab)), text::normalize_whitespace(line.substr(tab + 1))};
    if (f.child.empty() || f.parent.empty() || f.child == f.parent) {
      throw ValidationError(std::string(origin) + ":" + std::to_string(i + 1) + ": invalid parent fact");
    }
    facts.push_back(std::move(f));
  }
  return facts;
}

std::vector<ParentFact> load_facts(const std::filesystem::path& path) {
  return parse_facts(io::read_file(path), path.string());
}

McqItem to_mcq_item(const PfqaQuestion& q, std::string id) {
  McqItem item;
  item.id = std::move(id);
  item.question = q.question;
  item.options = q.options;
  item.gold = q.gold;
  return item;
}

std::string serialize_questions(const std::vector<PfqaQuestion>& questions, std::string_view id_prefix) {
  std::string out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto& q = questions[i];
    char buf[32];
    std::snprintf(buf, sizeof buf, "%08zu", i);
    nlohmann::json j;
    j["id"] = std::string(id_prefix) + "-" + buf;
    j["context"] = nullptr;
    j["question"] = q.question;
    j["options"] = q.options;
    j["gold"] = q.gold;
    j["premises"] = nullptr;
    j["person"] = q.person;
    j["qtype"] = std::string(question_type_name(q.qtype));
    j["knowledge"] = q.knowledge;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace kinfuse::pfqa
