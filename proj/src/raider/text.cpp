// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

// Report ingestion, normalization and chunking.

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "slidekit/error.hpp"
#include "slidekit/raider/raider.hpp"

namespace slidekit::raider {
namespace {

using nlohmann::json;

constexpr std::string_view kReplacement = "\xEF\xBF\xBD";

// Length of the valid UTF-8 sequence starting at s[i], or 0 if invalid.
std::size_t utf8_sequence(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return 1;
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

std::string repair_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const std::size_t n = utf8_sequence(s, i);
    if (n == 0) {
      out += kReplacement;
      ++i;
    } else {
      out.append(s.substr(i, n));
      i += n;
    }
  }
  return out;
}

bool is_horizontal_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  const std::string text = repair_utf8(raw);
  std::string out;
  std::size_t pending_blank = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line;
    bool space = false;
    for (std::size_t i = pos; i < eol; ++i) {
      if (is_horizontal_space(text[i])) {
        space = !line.empty();
      } else {
        if (space) line += ' ';
        space = false;
        line += text[i];
      }
    }
    if (line.empty()) {
      ++pending_blank;
    } else {
      if (!out.empty()) out += pending_blank > 0 ? "\n\n" : "\n";
      out += line;
      pending_blank = 0;
    }
    pos = eol + 1;
  }
  return out;
}

ReportDoc ingest_text(std::string doc_id, std::string slide_id, std::string_view text) {
  ReportDoc doc{std::move(doc_id), std::move(slide_id), normalize_text(text),
                ReportSource::pre_extracted};
  if (doc.text.empty()) throw EmptyDocumentError("report '" + doc.doc_id + "' has no text");
  return doc;
}

ReportDoc ingest_ocr(std::string doc_id, std::string slide_id, std::string_view document,
                     llm::Transport& ocr, const llm::RetryPolicy& retry) {
  std::string text;
  try {
    const auto r = llm::post_with_retry(ocr, "/ocr", document, "application/octet-stream", retry);
    text = json::parse(r.body).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw IngestionError("OCR of '" + doc_id + "': malformed response: " + e.what());
  } catch (const Error& e) {
    throw IngestionError("OCR of '" + doc_id + "' failed: " + e.what());
  }
  ReportDoc doc = ingest_text(std::move(doc_id), std::move(slide_id), text);
  doc.source = ReportSource::ocr_service;
  return doc;
}

std::vector<ReportDoc> load_reports(const std::string& path) {
  namespace fs = std::filesystem;
  std::vector<ReportDoc> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string id = f.stem().string();
      docs.push_back(ingest_text(id, id, read_file(f)));
    }
    return docs;
  }
  std::istringstream lines(read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto id = j.at("doc_id").get<std::string>();
      docs.push_back(ingest_text(id, j.value("slide_id", id), j.at("text").get<std::string>()));
    } catch (const json::exception& e) {
      throw FormatError(fmt::format("{}:{}: {}", path, n, e.what()));
    }
  }
  return docs;
}

std::vector<ReportDoc> synthetic_reports(std::size_t count, std::uint64_t seed) {
  struct Site {
    const char* organ;
    const char* procedure;
    const char* diagnosis;
    const char* pattern;
  };
  static constexpr Site kSites[] = {
      {"lung, right upper lobe", "lobectomy", "invasive adenocarcinoma",
       "acinar and lepidic growth patterns"},
      {"breast, left", "lumpectomy", "invasive ductal carcinoma",
       "nests and cords of pleomorphic cells"},
      {"colon, sigmoid", "segmental resection", "adenocarcinoma",
       "glandular architecture with dirty necrosis"},
      {"kidney, left", "radical nephrectomy", "clear cell renal cell carcinoma",
       "nests of cells with clear cytoplasm and delicate vasculature"},
      {"prostate", "radical prostatectomy", "acinar adenocarcinoma",
       "small crowded glands with prominent nucleoli"},
      {"thyroid, right lobe", "lobectomy", "papillary thyroid carcinoma",
       "papillae with nuclear grooves and pseudoinclusions"},
      {"skin, back", "wide local excision", "malignant melanoma",
       "atypical melanocytes with pagetoid spread"},
      {"stomach", "partial gastrectomy", "poorly differentiated adenocarcinoma",
       "diffuse sheets with signet ring cells"},
  };
  static constexpr const char* kGrades[] = {"well differentiated", "moderately differentiated",
                                            "poorly differentiated"};
  static constexpr const char* kMargins[] = {"All surgical margins are free of tumor.",
                                             "The closest margin is involved by tumor.",
                                             "Margins are negative; the closest is the deep margin."};
  static constexpr const char* kNodes[] = {"No lymph node metastasis is identified.",
                                           "Metastatic carcinoma is present in one lymph node.",
                                           "Two lymph nodes contain metastatic carcinoma."};
  static constexpr const char* kInvasion[] = {"Lymphovascular invasion is not identified.",
                                              "Lymphovascular invasion is present.",
                                              "Perineural invasion is present."};

  std::mt19937_64 rng(seed);
  std::vector<ReportDoc> docs;
  for (std::size_t i = 0; i < count; ++i) {
    const Site& site = kSites[rng() % std::size(kSites)];
    const auto grade = kGrades[rng() % std::size(kGrades)];
    const auto margin = kMargins[rng() % std::size(kMargins)];
    const auto nodes = kNodes[rng() % std::size(kNodes)];
    const auto invasion = kInvasion[rng() % std::size(kInvasion)];
    const auto size_cm = 1.0 + static_cast<double>(rng() % 60) / 10.0;
    const auto blocks = 4 + rng() % 12;
    std::string organ_upper = site.organ;
    std::transform(organ_upper.begin(), organ_upper.end(), organ_upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });

    std::string text = fmt::format(
        "SURGICAL PATHOLOGY REPORT\n\n"
        "SPECIMEN: {organ}, {procedure}.\n\n"
        "CLINICAL HISTORY: Mass identified on imaging. Rule out malignancy.\n\n"
        "GROSS DESCRIPTION: Received fresh is a {procedure} specimen from the {organ}. "
        "On sectioning there is a firm tan-white mass measuring {size:.1f} cm in greatest "
        "dimension. The cut surface is variegated with areas of hemorrhage. "
        "Representative sections are submitted in {blocks} cassettes.\n\n"
        "MICROSCOPIC DESCRIPTION: Sections show {diagnosis}, {grade}, composed of {pattern}. "
        "The surrounding parenchyma shows reactive changes with chronic inflammation. "
        "{invasion} Mitotic figures are readily identified.\n\n"
        "LYMPH NODES: {nodes}\n\n"
        "MARGINS: {margin}\n\n"
        "FINAL DIAGNOSIS: {organ_upper}, {procedure}: {diagnosis}, {grade}, tumor size "
        "{size:.1f} cm. {margin} {nodes}\n\n"
        "COMMENT: The findings were discussed with the clinical team. Immunohistochemical "
        "stains performed on block A3 support the diagnosis, with appropriate controls.",
        fmt::arg("organ", site.organ), fmt::arg("procedure", site.procedure),
        fmt::arg("size", size_cm), fmt::arg("blocks", blocks), fmt::arg("diagnosis", site.diagnosis),
        fmt::arg("grade", grade), fmt::arg("pattern", site.pattern), fmt::arg("invasion", invasion),
        fmt::arg("nodes", nodes), fmt::arg("margin", margin),
        fmt::arg("organ_upper", organ_upper));
    const auto id = fmt::format("report-{:04}", i + 1);
    docs.push_back(ingest_text(id, fmt::format("slide-{:04}", i + 1), text));
  }
  return docs;
}

std::vector<Chunk> chunk_text(const ReportDoc& doc, const ChunkingConfig& config) {
  if (config.chunk_size == 0) throw ConfigError("chunk_size must be >= 1");
  if (config.overlap >= config.chunk_size)
    throw ConfigError(fmt::format("chunk overlap {} must be smaller than chunk_size {}",
                                  config.overlap, config.chunk_size));
  // Byte offset of every code point, plus the end.
  std::vector<std::size_t> at;
  for (std::size_t i = 0; i < doc.text.size(); ++i)
    if ((static_cast<unsigned char>(doc.text[i]) & 0xC0) != 0x80) at.push_back(i);
  const std::size_t length = at.size();
  at.push_back(doc.text.size());

  // A document that fits in one chunk is one chunk; otherwise a chunk starts
  // at every multiple of the stride below the length, even when the previous
  // chunk already reaches the end.
  std::vector<Chunk> chunks;
  const std::size_t stride = length <= config.chunk_size ? length : config.chunk_size - config.overlap;
  for (std::size_t start = 0; start < length; start += stride) {
    const std::size_t end = std::min(start + config.chunk_size, length);
    chunks.push_back({fmt::format("{}#{:04}", doc.doc_id, chunks.size()), doc.doc_id, start, end,
                      doc.text.substr(at[start], at[end] - at[start]), {}});
  }
  return chunks;
}

}  // namespace slidekit::raider
