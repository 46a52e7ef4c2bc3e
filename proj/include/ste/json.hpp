#ifndef STE_JSON_HPP
#define STE_JSON_HPP

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ste/core.hpp"
#include "ste/csv.hpp"
#include "ste/error.hpp"
#include "ste/fitting.hpp"

namespace ste {

inline constexpr int kModelSchemaVersion = 1;

using ojson = nlohmann::ordered_json;

inline ojson component_to_json(const ComponentParams& c) {
  return ojson{{"mu_a", c.mu_a}, {"sigma_a", c.sigma_a}, {"mu_n", c.mu_n}, {"sigma_n", c.sigma_n}, {"rho", c.rho}};
}

inline ojson model_to_json(const SteModel& model) {
  ojson comps = ojson::array();
  for (const auto& c : model.components) comps.push_back(component_to_json(c));
  return ojson{{"version", kModelSchemaVersion}, {"d", model.d},         {"x0", model.x0},
               {"sigma2", model.sigma2},         {"rescale", model.rescale}, {"components", comps}};
}

/// Serialized model. nlohmann emits the shortest decimal that reads back to
/// the same double.
inline std::string dump_model(const SteModel& model) { return model_to_json(model).dump(2) + '\n'; }

inline SteModel model_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("version").get<int>();
    if (version != kModelSchemaVersion)
      throw DataError("unsupported model version " + std::to_string(version));
    const auto d = j.at("d").get<std::size_t>();
    std::vector<ComponentParams> comps;
    for (const auto& c : j.at("components")) {
      ComponentParams p;
      p.mu_a = c.at("mu_a").get<double>();
      p.sigma_a = c.at("sigma_a").get<double>();
      p.mu_n = c.at("mu_n").get<std::vector<double>>();
      p.sigma_n = c.at("sigma_n").get<std::vector<double>>();
      p.rho = c.at("rho").get<std::vector<double>>();
      comps.push_back(std::move(p));
    }
    auto x0 = j.at("x0").get<std::vector<double>>();
    const double sigma2 = j.value("sigma2", 0.0);
    auto rescale = j.value("rescale", std::vector<double>{});
    SteModel model = make_model(std::move(comps), std::move(x0), sigma2, std::move(rescale));
    if (model.d != d) throw DataError("model field d disagrees with component dimensions");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
}

inline nlohmann::json parse_json(const std::string& text, const std::string& source) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
}

inline SteModel load_model(const std::filesystem::path& path) {
  return model_from_json(parse_json(read_text(path), path.string()));
}

/// Model document extended with the selection record: rss, sigma2,
/// chosen_m and the per-M RSS table (null where a fit failed).
inline ojson selected_fit_to_json(const SelectedFit& fit) {
  ojson j = model_to_json(fit.chosen.model);
  j["rss"] = fit.chosen.rss;
  j["chosen_m"] = fit.chosen_m;
  j["n_starts_converged"] = fit.chosen.n_starts_converged;
  j["best_start_index"] = fit.chosen.best_start_index;
  ojson table = ojson::array();
  for (std::size_t m = 0; m < fit.per_m.size(); ++m) {
    ojson row{{"m", m + 1}};
    if (fit.per_m[m]) {
      row["rss"] = fit.per_m[m]->rss;
      row["sigma2"] = fit.per_m[m]->sigma2;
      row["underdetermined"] = fit.per_m[m]->underdetermined;
    } else {
      row["rss"] = nullptr;
      row["error"] = fit.failures[m];
    }
    table.push_back(std::move(row));
  }
  j["per_m"] = std::move(table);
  return j;
}

/// CSV form of the per-M table: m, rss, sigma2 (empty cells on failure).
inline std::string per_m_csv(const SelectedFit& fit) {
  std::string out = "m,rss,sigma2\n";
  for (std::size_t m = 0; m < fit.per_m.size(); ++m) {
    out += std::to_string(m + 1) + ',';
    if (fit.per_m[m]) out += format_double(fit.per_m[m]->rss) + ',' + format_double(fit.per_m[m]->sigma2);
    else out += ',';
    out += '\n';
  }
  return out;
}

}  // namespace ste

#endif  // STE_JSON_HPP
