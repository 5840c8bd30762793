#include "persona/llm_eval.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "persona/error.hpp"
#include "persona/io.hpp"

namespace persona {

void validate(const ModelEvalRecord& r) {
  if (!(r.gt >= 0) || !std::isfinite(r.gt)) {
    throw ValidationError("model '" + r.model_id + "': generation time must be >= 0");
  }
  const std::pair<const char*, double> rates[] = {{"mr", r.mr}, {"ir", r.ir}, {"pp", r.pp},
                                                  {"of", r.of}, {"cc", r.cc}, {"fa", r.fa}};
  for (const auto& [name, v] : rates) {
    if (!(v >= 0 && v <= 1)) {
      throw ValidationError("model '" + r.model_id + "': " + name + " outside [0, 1]");
    }
  }
}

double overall_score(const ModelEvalRecord& r) {
  validate(r);
  return (r.pp + r.of + r.cc + r.fa + (1.0 - r.mr) + (1.0 - r.ir)) / 6.0;
}

std::vector<ModelEvalRecord> parse_eval_records(std::string_view csv) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(csv)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw ValidationError("evaluation table has no header");
  const auto header = split_csv_line(lines.front());
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string h = header[i];
    if (h == "model") h = "model_id";
    pos[h] = i;
  }
  for (const char* need : {"model_id", "gt", "mr", "ir", "pp", "of", "cc", "fa"}) {
    if (!pos.count(need)) throw ValidationError(std::string("evaluation table lacks column '") + need + "'");
  }
  std::vector<ModelEvalRecord> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_csv_line(lines[li]);
    if (f.size() != header.size()) {
      throw ValidationError("line " + std::to_string(li + 1) + ": expected " +
                            std::to_string(header.size()) + " fields");
    }
    auto num = [&](const char* name) {
      const auto& s = f[pos.at(name)];
      double v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) {
        throw ValidationError("line " + std::to_string(li + 1) + ": bad number in '" + name + "'");
      }
      return v;
    };
    ModelEvalRecord r;
    r.model_id = f[pos.at("model_id")];
    if (pos.count("dataset")) r.dataset = f[pos.at("dataset")];
    r.gt = num("gt");
    r.mr = num("mr");
    r.ir = num("ir");
    r.pp = num("pp");
    r.of = num("of");
    r.cc = num("cc");
    r.fa = num("fa");
    validate(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ModelEvalRecord> load_eval_records(const std::filesystem::path& path) {
  return parse_eval_records(read_file(path));
}

PromptStd intra_prompt_std(std::span<const std::array<double, 5>> runs) {
  if (runs.size() < 2) throw ValidationError("need at least 2 runs per prompt");
  const double n = static_cast<double>(runs.size());
  PromptStd out;
  for (std::size_t k = 0; k < 5; ++k) {
    double m = 0;
    for (const auto& r : runs) m += r[k];
    m /= n;
    double ss = 0;
    for (const auto& r : runs) ss += (r[k] - m) * (r[k] - m);
    out.per_trait[k] = std::sqrt(ss / (n - 1.0));
    out.mean += out.per_trait[k] / 5.0;
  }
  return out;
}

std::array<double, 5> prompt_means(std::span<const std::array<double, 5>> runs) {
  if (runs.empty()) throw ValidationError("no runs");
  std::array<double, 5> m{};
  for (const auto& r : runs) {
    for (std::size_t k = 0; k < 5; ++k) m[k] += r[k];
  }
  for (double& v : m) v /= static_cast<double>(runs.size());
  return m;
}

double manhattan_between_prompts(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("length mismatch");
  if (a.size() != 5) throw ValidationError("expected 5 trait means");
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

}  // namespace persona
