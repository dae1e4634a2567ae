#include "json_config.hpp"

#include "json.hpp"

namespace instloc::cli {

using nlohmann::json;

namespace {

std::string Scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

void Collect(const json& node, std::vector<std::string> parents, std::vector<CLI::ConfigItem>* out) {
  for (const auto& [key, value] : node.items()) {
    if (value.is_object()) {
      auto next = parents;
      next.push_back(key);
      Collect(value, next, out);
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(Scalar(v));
    } else {
      item.inputs.push_back(Scalar(value));
    }
    out->push_back(std::move(item));
  }
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool default_also, bool, std::string) const {
  json j;
  for (const CLI::Option* opt : app->get_options({})) {
    if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
    const std::string name = opt->get_lnames()[0];
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (results.size() == 1) {
        j[name] = results[0];
      } else {
        j[name] = results;
      }
    } else if (default_also && !opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    }
  }
  return j.dump(1);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  json j;
  try {
    input >> j;
  } catch (const json::exception& e) {
    throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
  std::vector<CLI::ConfigItem> items;
  Collect(j, {}, &items);
  return items;
}

}  // namespace instloc::cli
