#pragma once

#include "CLI11.hpp"

namespace instloc::cli {

// CLI11 config reader for JSON files. Top-level keys set options of the main
// app; nested objects address subcommands, e.g.
//   {"seed": 7, "render": {"width": 1024, "height": 512}}
// Values given on the command line take precedence.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

}  // namespace instloc::cli
