#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "isostable/error.hpp"

using namespace isostable;
using namespace isostable::cli;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Io:
      return kConfigError;
    default:
      return kNumericFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Isostables and isochrons from Laplace averages"};
  app.require_subcommand(1);
  std::string config_path;
  CommandOptions opts;

  auto add = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "JSON run configuration")->required();
    return sub;
  };
  auto* fixed_point = add("fixed-point", "Locate the fixed point(s)");
  auto* spectrum = add("spectrum", "Fixed point and Jacobian spectrum as JSON");
  auto* trajectory = add("trajectory", "Sample a trajectory as CSV");
  trajectory->add_option("-o,--output", opts.output, "CSV path (default: standard output)");
  auto* field = add("field", "Evaluate an eigenfunction quantity on a grid");
  field->add_option("-o,--output", opts.output, "Output prefix for <prefix>.csv and <prefix>.json")->required();
  field->add_option("-j,--threads", opts.threads, "Worker threads (0: hardware concurrency)");
  field->add_flag("--no-timestamp", [&](std::int64_t) { opts.timestamp = false; }, "Omit the header timestamp");
  auto* contour = add("contour", "Extract level sets from a field");
  contour->add_option("-f,--field", opts.field, "Field prefix or CSV path")->required();
  contour->add_option("-o,--output", opts.output, "Output prefix for <prefix>.level<k>.json");
  auto* validate = add("validate", "Run the invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const RunConfig config = load_config(config_path);
    if (*fixed_point) return cmd_fixed_point(config, std::cout);
    if (*spectrum) return cmd_spectrum(config, std::cout);
    if (*trajectory) return cmd_trajectory(config, opts, std::cout);
    if (*field) return cmd_field(config, opts, std::cout);
    if (*contour) return cmd_contour(config, opts, std::cout, std::cerr);
    if (*validate) return cmd_validate(config, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericFailure;
  }
  return kConfigError;
}
