#include "kinfuse/mcq.hpp"

#include <unordered_set>

#include "kinfuse/error.hpp"

namespace kinfuse {

void McqItem::validate() const {
  if (options.size() < 2) throw ValidationError("item " + id + ": needs at least 2 options");
  if (gold && *gold >= options.size()) throw ValidationError("item " + id + ": label out of range");
  if (premises && premises->size() != options.size()) {
    throw ValidationError("item " + id + ": premises must have one list per option");
  }
}

SchemaTag parse_schema_tag(std::string_view name) {
  if (name == "anli") return SchemaTag::Anli;
  if (name == "piqa") return SchemaTag::Piqa;
  if (name == "socialiqa" || name == "siqa") return SchemaTag::SocialIqa;
  if (name == "pfqa") return SchemaTag::Pfqa;
  if (name == "generic") return SchemaTag::Generic;
  throw ValidationError("unknown schema '" + std::string(name) + "'");
}

std::string_view schema_tag_name(SchemaTag tag) {
  switch (tag) {
    case SchemaTag::Anli: return "anli";
    case SchemaTag::Piqa: return "piqa";
    case SchemaTag::SocialIqa: return "socialiqa";
    case SchemaTag::Pfqa: return "pfqa";
    case SchemaTag::Generic: return "generic";
  }
  return "generic";
}

void McqDataset::validate() const {
  std::unordered_set<std::string> ids;
  for (const auto& item : items) {
    item.validate();
    if (!ids.insert(item.id).second) throw ValidationError("duplicate item id " + item.id);
    if (item.n_options() != items.front().n_options()) {
      throw ValidationError("item " + item.id + ": option count differs from the rest of the dataset");
    }
  }
}

bool McqDataset::has_gold() const {
  for (const auto& item : items) {
    if (!item.gold) return false;
  }
  return !items.empty();
}

}  // namespace kinfuse
