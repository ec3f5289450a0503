#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sforge/cli/commands.hpp"

using namespace sforge;

namespace {

RunConfig config_from(const std::string& path, const std::vector<std::string>& overrides) {
  std::string text = path.empty() ? std::string() : read_text_file(path);
  if (!text.empty() && text.back() != '\n') text += '\n';
  const auto file_lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  for (const auto& o : overrides) text += o + '\n';
  return parse_run_config(text, path.empty() ? "<args>" : path, file_lines);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sforge: sentiment classification toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "run config (key = value lines)");
    sub->add_option("-s,--set", overrides, "extra config line, e.g. embed.dim=50");
  };

  std::string in_path, out_path, policy = "strip-except-question", qmode = "detached";
  bool plain = false;
  auto* pre = app.add_subcommand("preprocess", "filter and tokenize a corpus");
  pre->add_option("--in", in_path)->required();
  pre->add_option("--out", out_path)->required();
  pre->add_option("--policy", policy, "keep-all | strip-all | strip-except-question");
  pre->add_option("--question-mode", qmode, "attached | detached");
  pre->add_flag("--plain", plain, "input has no label column");

  auto* embed = app.add_subcommand("embed", "train word vectors (optionally a dimension sweep)");
  add_config(embed);
  auto* train = app.add_subcommand("train", "holdout training; writes checkpoint and report");
  add_config(train);
  auto* cv = app.add_subcommand("cv", "k-fold cross validation");
  add_config(cv);

  std::string checkpoint, data_path, predictions, report;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on labeled data, or a predictions file");
  eval->add_option("--checkpoint", checkpoint);
  eval->add_option("--data", data_path);
  eval->add_option("--predictions", predictions, "ACTUAL<TAB>PREDICTED lines");
  eval->add_option("--report", report);

  std::string file_a, file_b;
  auto* kappa = app.add_subcommand("kappa", "Cohen's kappa between two label files");
  kappa->add_option("a", file_a)->required();
  kappa->add_option("b", file_b)->required();

  std::vector<std::string> texts;
  auto* predict = app.add_subcommand("predict", "label raw comments");
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("text", texts)->required();

  std::string model_name;
  std::size_t vocab_size = 1000;
  auto* describe = app.add_subcommand("describe", "layer shapes and parameter counts");
  add_config(describe);
  describe->add_option("--model", model_name);
  describe->add_option("--vocab", vocab_size);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*pre) return cmd_preprocess(in_path, out_path, parse_policy(policy), parse_question_mode(qmode), !plain, std::cout);
    if (*embed) return cmd_embed(config_from(config_path, overrides), std::cout);
    if (*train) return cmd_train(config_from(config_path, overrides), std::cout, std::cerr);
    if (*cv) return cmd_cv(config_from(config_path, overrides), std::cout);
    if (*eval) {
      if (!predictions.empty()) return cmd_eval_predictions(predictions, report, std::cout);
      if (checkpoint.empty() || data_path.empty()) fail(ErrorKind::Config, "eval needs --checkpoint and --data, or --predictions");
      return cmd_eval_checkpoint(checkpoint, data_path, report, std::cout);
    }
    if (*kappa) return cmd_kappa(file_a, file_b, std::cout);
    if (*predict) return cmd_predict(checkpoint, texts, std::cout);
    if (*describe) {
      if (!model_name.empty()) overrides.insert(overrides.begin(), "model.name = " + model_name);
      return cmd_describe(config_from(config_path, overrides).model, vocab_size, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.detail() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
