#include "stance/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stance/csv.hpp"
#include "stance/error.hpp"

namespace stance {

namespace {

constexpr std::array<std::string_view, kNumLabels> kLabelNames = {"agree", "disagree", "discuss",
                                                                 "unrelated"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; };
           return lower(x) == lower(y);
         });
}

struct Table {
  std::vector<std::string> header;
  std::vector<csv::Row> rows;

  std::size_t column(std::string_view name, std::string_view source) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError(std::string(source) + ": missing header column \"" + std::string(name) + "\"");
    }
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_table(std::string_view text, std::string_view source) {
  auto records = csv::parse(text, source);
  if (records.empty()) {
    throw DataError(std::string(source) + ": empty file, expected a header row");
  }
  Table table;
  table.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != table.header.size()) {
      std::ostringstream msg;
      msg << source << ": row " << (i + 1) << " has " << records[i].size() << " fields, expected "
          << table.header.size();
      throw DataError(msg.str());
    }
    table.rows.push_back(std::move(records[i]));
  }
  return table;
}

std::int64_t parse_body_id(std::string_view text, std::string_view source, std::size_t row) {
  std::int64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty() || value < 0) {
    std::ostringstream msg;
    msg << source << ": row " << row << ": invalid Body ID \"" << text << "\"";
    throw DataError(msg.str());
  }
  return value;
}

// Unbiased draw from [0, bound) using only the raw 64-bit engine output.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) {
    draw = rng();
  }
  return draw % bound;
}

}  // namespace

StanceLabel label_from_code(std::size_t value) {
  if (value >= kNumLabels) {
    throw DataError("stance code out of range: " + std::to_string(value));
  }
  return static_cast<StanceLabel>(value);
}

std::string_view to_string(StanceLabel label) { return kLabelNames[code(label)]; }

std::optional<StanceLabel> parse_stance(std::string_view text) {
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (iequals(text, kLabelNames[i])) {
      return static_cast<StanceLabel>(i);
    }
  }
  return std::nullopt;
}

BodyMap parse_bodies(std::string_view text, std::string_view source) {
  const Table table = read_table(text, source);
  const std::size_t id_col = table.column("Body ID", source);
  const std::size_t body_col = table.column("articleBody", source);

  BodyMap bodies;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::int64_t id = parse_body_id(row[id_col], source, i + 2);
    auto [it, inserted] = bodies.emplace(id, ArticleBody{id, row[body_col]});
    if (!inserted) {
      std::ostringstream msg;
      msg << source << ": row " << (i + 2) << ": duplicate Body ID " << id;
      throw DataError(msg.str());
    }
  }
  return bodies;
}

std::vector<ClaimInstance> parse_stances(std::string_view text, bool labeled, std::string_view source) {
  const Table table = read_table(text, source);
  const std::size_t headline_col = table.column("Headline", source);
  const std::size_t id_col = table.column("Body ID", source);
  const std::size_t stance_col = labeled ? table.column("Stance", source) : 0;

  std::vector<ClaimInstance> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    ClaimInstance claim;
    claim.headline = row[headline_col];
    claim.body_id = parse_body_id(row[id_col], source, i + 2);
    if (labeled) {
      claim.stance = parse_stance(row[stance_col]);
      if (!claim.stance) {
        std::ostringstream msg;
        msg << source << ": row " << (i + 2) << ": unknown stance \"" << row[stance_col] << "\"";
        throw DataError(msg.str());
      }
    }
    out.push_back(std::move(claim));
  }
  return out;
}

BodyMap load_bodies(const std::string& path) { return parse_bodies(csv::read_file(path), path); }

std::vector<ClaimInstance> load_stances(const std::string& path, bool labeled) {
  return parse_stances(csv::read_file(path), labeled, path);
}

std::vector<PairedExample> join_pairs(std::span<const ClaimInstance> stances, const BodyMap& bodies) {
  std::set<std::int64_t> dangling;
  std::vector<PairedExample> out;
  out.reserve(stances.size());
  for (const auto& claim : stances) {
    auto it = bodies.find(claim.body_id);
    if (it == bodies.end()) {
      dangling.insert(claim.body_id);
      continue;
    }
    out.push_back(PairedExample{claim.headline, it->second.text, claim.stance, claim.body_id});
  }
  if (!dangling.empty()) {
    std::ostringstream msg;
    msg << "stances reference " << dangling.size() << " missing body id(s):";
    for (auto id : dangling) {
      msg << ' ' << id;
    }
    throw DataError(msg.str());
  }
  return out;
}

std::vector<PairedExample> load_split(const std::string& bodies_path, const std::string& stances_path,
                                      bool labeled) {
  const auto bodies = load_bodies(bodies_path);
  const auto stances = load_stances(stances_path, labeled);
  return join_pairs(stances, bodies);
}

DatasetStats compute_stats(std::span<const PairedExample> pairs) {
  if (pairs.empty()) {
    throw DataError("cannot compute statistics of an empty corpus");
  }
  DatasetStats stats;
  stats.total = pairs.size();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].label) {
      throw DataError("example " + std::to_string(i) + " is unlabeled; statistics need gold labels");
    }
    ++stats.per_label_count[code(*pairs[i].label)];
  }
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    stats.per_label_percent[k] =
        static_cast<double>(stats.per_label_count[k]) / static_cast<double>(stats.total);
  }
  return stats;
}

std::string format_bodies(std::span<const PairedExample> pairs) {
  std::map<std::int64_t, const std::string*> bodies;
  for (const auto& p : pairs) {
    auto [it, inserted] = bodies.emplace(p.source_body_id, &p.article);
    if (!inserted && *it->second != p.article) {
      throw DataError("body id " + std::to_string(p.source_body_id) + " carries two different texts");
    }
  }
  std::ostringstream out;
  csv::write_row(out, {"Body ID", "articleBody"});
  for (const auto& [id, text] : bodies) {
    csv::write_row(out, {std::to_string(id), *text});
  }
  return std::move(out).str();
}

std::string format_stances(std::span<const PairedExample> pairs) {
  const bool labeled = std::all_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.label.has_value(); });
  std::ostringstream out;
  if (labeled) {
    csv::write_row(out, {"Headline", "Body ID", "Stance"});
  } else {
    csv::write_row(out, {"Headline", "Body ID"});
  }
  for (const auto& p : pairs) {
    csv::Row row{p.claim, std::to_string(p.source_body_id)};
    if (labeled) {
      row.emplace_back(to_string(*p.label));
    }
    csv::write_row(out, row);
  }
  return std::move(out).str();
}

std::string format_percent(double fraction) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << fraction * 100.0;
  return std::move(out).str();
}

Reconciliation reconcile(const DatasetStats& stats, const SplitReference& reference) {
  Reconciliation r;
  r.reference = &reference;
  r.count_matches = stats.total == reference.total;
  if (!r.count_matches) {
    r.warnings.push_back("pair count " + std::to_string(stats.total) + " differs from the reference " +
                         std::string(reference.name) + " count " + std::to_string(reference.total));
  }
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const double deviation = std::abs(stats.per_label_percent[k] * 100.0 - reference.percent[k]);
    r.max_percent_deviation = std::max(r.max_percent_deviation, deviation);
    if (deviation > 0.01 + 1e-9) {
      std::ostringstream msg;
      msg << "% " << to_string(label_from_code(k)) << " is " << format_percent(stats.per_label_percent[k])
          << ", reference " << std::fixed << std::setprecision(2) << reference.percent[k];
      r.warnings.push_back(msg.str());
    }
  }
  return r;
}

const SplitReference& closest_reference(const DatasetStats& stats) {
  auto distance = [&](const SplitReference& ref) {
    return stats.total > ref.total ? stats.total - ref.total : ref.total - stats.total;
  };
  return distance(kTrainReference) <= distance(kTestReference) ? kTrainReference : kTestReference;
}

std::string stats_to_json(const DatasetStats& stats, const Reconciliation* reconciliation) {
  nlohmann::ordered_json doc;
  doc["total"] = stats.total;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const std::string name(to_string(label_from_code(k)));
    doc["counts"][name] = stats.per_label_count[k];
    doc["percent"][name] = format_percent(stats.per_label_percent[k]);
  }
  if (reconciliation != nullptr && reconciliation->reference != nullptr) {
    auto& rec = doc["reference"];
    rec["split"] = reconciliation->reference->name;
    rec["total"] = reconciliation->reference->total;
    rec["count_matches"] = reconciliation->count_matches;
    rec["max_percent_deviation"] = reconciliation->max_percent_deviation;
    rec["warnings"] = reconciliation->warnings;
  }
  return doc.dump(2) + "\n";
}

std::string stats_to_csv(const DatasetStats& stats) {
  std::ostringstream out;
  csv::write_row(out, {"label", "count", "percent"});
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    csv::write_row(out, {std::string(to_string(label_from_code(k))), std::to_string(stats.per_label_count[k]),
                         format_percent(stats.per_label_percent[k])});
  }
  csv::write_row(out, {"total", std::to_string(stats.total), "100.00"});
  return std::move(out).str();
}

std::string stats_to_table(const DatasetStats& stats, const Reconciliation* reconciliation) {
  // Row order follows the published table: unrelated, discuss, agree, disagree.
  constexpr std::array<StanceLabel, kNumLabels> order = {StanceLabel::Unrelated, StanceLabel::Discuss,
                                                         StanceLabel::Agree, StanceLabel::Disagree};
  const bool with_ref = reconciliation != nullptr && reconciliation->reference != nullptr;
  std::ostringstream out;
  out << std::left << std::setw(26) << "" << std::right << std::setw(10) << "observed";
  if (with_ref) {
    out << std::setw(11) << "reference";
  }
  out << "\n" << std::left << std::setw(26) << "# of claim-article pairs" << std::right << std::setw(10)
      << stats.total;
  if (with_ref) {
    out << std::setw(11) << reconciliation->reference->total;
  }
  out << "\n";
  for (auto label : order) {
    out << std::left << std::setw(26) << ("% " + std::string(to_string(label))) << std::right << std::setw(10)
        << format_percent(stats.per_label_percent[code(label)]);
    if (with_ref) {
      out << std::setw(11) << std::fixed << std::setprecision(2) << reconciliation->reference->percent[code(label)];
    }
    out << "\n";
  }
  return std::move(out).str();
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) {
    perm[i] = i;
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::pair<std::vector<PairedExample>, std::vector<PairedExample>> holdout_split(
    std::span<const PairedExample> pairs, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("holdout fraction must be in [0, 1)");
  }
  std::size_t held = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(pairs.size())));
  if (pairs.size() >= 2) {
    held = std::clamp<std::size_t>(held, holdout_fraction > 0.0 ? 1 : 0, pairs.size() - 1);
  }
  const auto perm = seeded_permutation(pairs.size(), seed);
  std::vector<bool> is_held(pairs.size(), false);
  for (std::size_t i = 0; i < held; ++i) {
    is_held[perm[i]] = true;
  }
  std::pair<std::vector<PairedExample>, std::vector<PairedExample>> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    (is_held[i] ? out.second : out.first).push_back(pairs[i]);
  }
  return out;
}

}  // namespace stance
