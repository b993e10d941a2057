#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "stance/csv.hpp"
#include "stance/error.hpp"
#include "stance/evaluation.hpp"

namespace stance {

namespace {

constexpr std::array<ReferenceResult, 9> kPublished = {{
    {"Riedel et al.", 0.8172, 0.8846},
    {"Hanselowski et al.", 0.8197, 0.8948},
    {"Baird et al.", 0.8202, 0.8908},
    {"Bhatt et al.", 0.8308, 0.8929},
    {"Borges et al.", 0.8338, 0.8921},
    {"Zhang et al. 2018", 0.8666, 0.9200},
    {"Wang et al.", 0.8672, 0.8291},
    {"Zhang et al. 2019", 0.8815, 0.9350},
    {"RoBERTa-base fine-tuned, max_len 512", 0.9001, 0.9371},
}};

constexpr std::array<ReferenceAblationRow, 3> kPublishedAblation = {{
    {128, 0.8952, 0.9346},
    {256, 0.8954, 0.9348},
    {512, 0.9001, 0.9371},
}};

std::string full_precision(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return std::move(out).str();
}

nlohmann::ordered_json reference_json() {
  auto refs = nlohmann::ordered_json::array();
  for (const auto& r : kPublished) {
    refs.push_back({{"method", r.method}, {"acc_w", format_percent(r.acc_w)}, {"acc", format_percent(r.acc)}});
  }
  return refs;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::span<const ReferenceResult> published_results() { return kPublished; }
std::span<const ReferenceAblationRow> published_ablation() { return kPublishedAblation; }

std::string report_to_json(const EvalReport& report, const ConfusionMatrix& cm) {
  nlohmann::ordered_json doc;
  doc["n"] = report.n;
  doc["acc"] = report.acc;
  doc["acc_w"] = report.acc_w;
  doc["acc_ru"] = report.acc_ru;
  doc["acc_add"] = report.acc_add;
  doc["display"] = {{"acc", format_percent(report.acc)},
                    {"acc_w", format_percent(report.acc_w)},
                    {"acc_ru", format_percent(report.acc_ru)},
                    {"acc_add", format_percent(report.acc_add)}};
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const std::string name(to_string(label_from_code(k)));
    doc["per_class"][name] = {{"precision", report.precision[k]}, {"recall", report.recall[k]}};
  }
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : cm.counts()) {
    rows.push_back(row);
  }
  doc["confusion"] = {{"labels", {"agree", "disagree", "discuss", "unrelated"}}, {"rows_gold_cols_predicted", rows}};
  doc["published_reference_not_reproduced"] = reference_json();
  return doc.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  csv::write_row(out, {"metric", "value", "percent"});
  auto row = [&](std::string name, double v) { csv::write_row(out, {std::move(name), full_precision(v), format_percent(v)}); };
  row("acc", report.acc);
  row("acc_w", report.acc_w);
  row("acc_ru", report.acc_ru);
  row("acc_add", report.acc_add);
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const std::string name(to_string(label_from_code(k)));
    row("precision_" + name, report.precision[k]);
    row("recall_" + name, report.recall[k]);
  }
  csv::write_row(out, {"n", std::to_string(report.n), ""});
  out << "# published reference (not reproduced): method,acc_w,acc\r\n";
  for (const auto& r : kPublished) {
    out << "# " << r.method << ',' << format_percent(r.acc_w) << ',' << format_percent(r.acc) << "\r\n";
  }
  return std::move(out).str();
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  csv::Row header{"gold\\predicted"};
  for (auto label : kAllLabels) {
    header.emplace_back(to_string(label));
  }
  csv::write_row(out, header);
  for (auto gold : kAllLabels) {
    csv::Row row{std::string(to_string(gold))};
    for (auto pred : kAllLabels) {
      row.push_back(std::to_string(cm.at(gold, pred)));
    }
    csv::write_row(out, row);
  }
  return std::move(out).str();
}

ConfusionMatrix confusion_from_csv(std::string_view text) {
  const auto rows = csv::parse(text, "confusion matrix");
  if (rows.size() != kNumLabels + 1) {
    throw DataError("confusion matrix CSV must have a header and 4 rows");
  }
  ConfusionMatrix::Counts counts{};
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    const auto& row = rows[g + 1];
    if (row.size() != kNumLabels + 1 || parse_stance(row[0]) != label_from_code(g)) {
      throw DataError("confusion matrix row " + std::to_string(g + 2) + " is malformed");
    }
    for (std::size_t p = 0; p < kNumLabels; ++p) {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(row[p + 1], &used);
        if (used != row[p + 1].size()) {
          throw std::invalid_argument("trailing");
        }
        counts[g][p] = v;
      } catch (const std::exception&) {
        throw DataError("confusion matrix cell \"" + row[p + 1] + "\" is not a count");
      }
    }
  }
  return ConfusionMatrix(counts);
}

std::string buckets_to_csv(const LengthBucketReport& report) {
  std::ostringstream out;
  csv::write_row(out, {"tokens", "n", "correct", "acc"});
  auto row = [&](const LengthBucket& b) {
    csv::write_row(out, {std::string(b.label), std::to_string(b.n), report.has_predictions ? std::to_string(b.correct) : "",
                         report.has_predictions ? format_percent(b.accuracy()) : ""});
  };
  for (const auto& b : report.buckets) {
    row(b);
  }
  row(report.overall);
  return std::move(out).str();
}

std::string buckets_to_json(const LengthBucketReport& report) {
  nlohmann::ordered_json doc;
  auto rows = nlohmann::ordered_json::array();
  auto entry = [&](const LengthBucket& b) {
    nlohmann::ordered_json e{{"tokens", b.label}, {"n", b.n}};
    if (report.has_predictions) {
      e["correct"] = b.correct;
      e["acc"] = b.accuracy();
    }
    return e;
  };
  for (const auto& b : report.buckets) {
    rows.push_back(entry(b));
  }
  doc["buckets"] = rows;
  doc["overall"] = entry(report.overall);
  return doc.dump(2) + "\n";
}

std::string ablation_to_csv(const AblationReport& report) {
  std::ostringstream out;
  csv::write_row(out, {"max_len", "acc_w", "acc"});
  for (const auto& r : report.rows) {
    csv::write_row(out, {std::to_string(r.max_len), full_precision(r.acc_w), full_precision(r.acc)});
  }
  out << "# published reference (not reproduced): max_len,acc_w,acc\r\n";
  for (const auto& r : kPublishedAblation) {
    out << "# " << r.max_len << ',' << format_percent(r.acc_w) << ',' << format_percent(r.acc) << "\r\n";
  }
  return std::move(out).str();
}

std::string ablation_to_json(const AblationReport& report) {
  nlohmann::ordered_json doc;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"max_len", r.max_len}, {"acc_w", r.acc_w}, {"acc", r.acc}});
  }
  doc["rows"] = rows;
  auto refs = nlohmann::ordered_json::array();
  for (const auto& r : kPublishedAblation) {
    refs.push_back({{"max_len", r.max_len}, {"acc_w", format_percent(r.acc_w)}, {"acc", format_percent(r.acc)}});
  }
  doc["published_reference_not_reproduced"] = refs;
  return doc.dump(2) + "\n";
}

std::string confusion_svg(const ConfusionMatrix& cm, std::string_view title) {
  constexpr int cell = 100;
  constexpr int left = 130;
  constexpr int top = 90;
  constexpr int width = left + cell * 4 + 30;
  constexpr int height = top + cell * 4 + 40;

  std::ostringstream out;
  out << R"(<?xml version="1.0" encoding="UTF-8"?>)" << "\n";
  out << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << width << R"(" height=")" << height
      << R"(" viewBox="0 0 )" << width << ' ' << height << R"(" font-family="sans-serif">)" << "\n";
  out << R"(  <rect x="0" y="0" width=")" << width << R"(" height=")" << height << R"(" fill="#ffffff"/>)" << "\n";
  out << R"(  <text x=")" << width / 2 << R"(" y="24" font-size="18" text-anchor="middle">)" << xml_escape(title)
      << "</text>\n";
  out << R"(  <text x=")" << left + cell * 2 << R"(" y="50" font-size="14" text-anchor="middle">predicted</text>)"
      << "\n";
  out << R"(  <text x="18" y=")" << top + cell * 2 << R"(" font-size="14" text-anchor="middle" transform="rotate(-90 18 )"
      << top + cell * 2 << R"lit()">gold</text>)lit" << "\n";

  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const auto name = to_string(label_from_code(k));
    out << R"(  <text x=")" << left + static_cast<int>(k) * cell + cell / 2 << R"(" y=")" << top - 10
        << R"(" font-size="13" text-anchor="middle">)" << name << "</text>\n";
    out << R"(  <text x=")" << left - 10 << R"(" y=")" << top + static_cast<int>(k) * cell + cell / 2 + 5
        << R"(" font-size="13" text-anchor="end">)" << name << "</text>\n";
  }

  for (std::size_t g = 0; g < kNumLabels; ++g) {
    const auto row_total = cm.row_total(g);
    for (std::size_t p = 0; p < kNumLabels; ++p) {
      const auto count = cm.at(g, p);
      const double share = row_total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(row_total);
      const int shade = static_cast<int>(std::lround(255.0 - 200.0 * share));
      const int x = left + static_cast<int>(p) * cell;
      const int y = top + static_cast<int>(g) * cell;
      out << R"(  <rect x=")" << x << R"(" y=")" << y << R"(" width=")" << cell << R"(" height=")" << cell
          << R"(" fill="rgb()" << shade << ',' << shade << ",255)" << R"(" stroke="#444444" stroke-width="1"/>)" << "\n";
      out << R"(  <text x=")" << x + cell / 2 << R"(" y=")" << y + cell / 2 + 6 << R"(" font-size="16" text-anchor="middle" fill=")"
          << (share > 0.6 ? "#ffffff" : "#000000") << R"(">)" << count << "</text>\n";
    }
  }
  out << "</svg>\n";
  return std::move(out).str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) {
    throw IoError("failed writing '" + path + "'");
  }
}

void render_confusion_svg(const ConfusionMatrix& cm, const std::string& path, std::string_view title) {
  write_text_file(path, confusion_svg(cm, title));
}

}  // namespace stance
