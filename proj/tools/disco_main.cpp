#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "disco/corpus.hpp"
#include "disco/diagnostics.hpp"
#include "disco/features.hpp"
#include "disco/logging.hpp"
#include "disco/metrics.hpp"
#include "disco/model.hpp"
#include "disco/predict.hpp"
#include "disco/synthgen.hpp"
#include "disco/trainer.hpp"

namespace {

using disco::Vec;
using ojson = nlohmann::ordered_json;

ojson load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

disco::DiscoConfig model_config_from_json(const ojson& j) {
  disco::DiscoConfig cfg;
  cfg.item_input_dim = j.value("item_input_dim", 0ULL);
  cfg.annot_input_dim = j.value("annot_input_dim", 0ULL);
  cfg.item_latent_dim = j.value("item_latent_dim", 64ULL);
  cfg.annot_latent_dim = j.value("annot_latent_dim", 64ULL);
  cfg.hidden_dim = j.value("hidden_dim", 0ULL);
  cfg.num_classes = j.value("num_classes", 0ULL);
  if (j.contains("activation"))
    cfg.activation = disco::activation_from_string(j["activation"].get<std::string>());
  if (j.contains("fusion") && j["fusion"].get<std::string>() != "concat")
    throw std::runtime_error("config: only 'concat' fusion is supported");
  if (j.contains("init")) cfg.init = disco::init_from_string(j["init"].get<std::string>());
  if (j.contains("init_scale")) cfg.init_scale = j["init_scale"].get<double>();
  cfg.seed = j.value("seed", 0ULL);
  return cfg;
}

disco::LossConfig loss_config_from_json(const ojson& j) {
  disco::LossConfig lc;
  if (j.contains("kind")) lc.kind = disco::loss_kind_from_string(j["kind"].get<std::string>());
  lc.alpha = j.value("alpha", 0.6);
  lc.lambda_item = j.value("lambda_item", 1.0);
  lc.lambda_annot = j.value("lambda_annot", 1.0);
  lc.validate();
  return lc;
}

disco::TrainConfig train_config_from_json(const ojson& j) {
  disco::TrainConfig tc;
  tc.epochs = j.value("epochs", 100ULL);
  tc.batch_size = j.value("batch_size", 64ULL);
  tc.lr = j.value("lr", 1e-3);
  tc.shuffle_seed = j.value("shuffle_seed", 0ULL);
  tc.eval_every = j.value("eval_every", 1ULL);
  if (j.contains("selection_metric"))
    tc.selection_metric =
        disco::selection_metric_from_string(j["selection_metric"].get<std::string>());
  if (j.contains("loss")) tc.loss = loss_config_from_json(j["loss"]);
  return tc;
}

std::vector<bool> annotators_seen_in_train(const disco::AnnotationDataset& ds) {
  std::vector<bool> seen(ds.num_annotators(), false);
  for (const auto& r : ds.records) {
    if (ds.items[r.item].split == disco::Split::train) seen[r.annotator] = true;
  }
  return seen;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const auto spec = disco::load_generator_spec(spec_path);
  const auto corpus = disco::generate(spec);
  disco::write_corpus_files(corpus, out_dir);
  disco::log_info("wrote synthetic corpus to ", out_dir, " (M=", spec.items,
                  " N=", spec.annotators, " C=", spec.classes, ")");
  return 0;
}

int cmd_check(const std::string& dataset_path) {
  const auto ds = disco::load_dataset(dataset_path);
  std::size_t n_train = 0, n_dev = 0, n_test = 0;
  for (const auto& it : ds.items) {
    if (it.split == disco::Split::train) ++n_train;
    else if (it.split == disco::Split::dev) ++n_dev;
    else ++n_test;
  }
  std::cout << "items=" << ds.num_items() << " (train=" << n_train << " dev=" << n_dev
            << " test=" << n_test << ") annotators=" << ds.num_annotators()
            << " classes=" << ds.num_classes() << " records=" << ds.records.size()
            << " ordinal=" << (ds.label_space.ordinal ? "true" : "false") << "\n";
  return 0;
}

int cmd_featurize(const std::string& dataset_path, const std::string& mode, std::size_t dim,
                  const std::string& out_path, bool render_metadata,
                  const std::string& template_text) {
  const auto ds = disco::load_dataset(dataset_path);
  if (render_metadata) {
    disco::MetadataTemplate tmpl = disco::MetadataTemplate::default_template();
    if (!template_text.empty()) tmpl.text = template_text;
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + out_path);
    for (const auto& a : ds.annotators)
      out << a.annotator_id << '\t' << disco::render_metadata_text(a, tmpl) << '\n';
    disco::log_info("wrote ", ds.num_annotators(), " metadata sentences to ", out_path);
    return 0;
  }
  if (mode == "hashed") {
    const auto fm = disco::hashed_bow(ds.items, dim);
    disco::save_embeddings(fm, ds.item_ids(), out_path);
    disco::log_info("wrote hashed bag-of-words item features (dim=", dim, ") to ", out_path);
  } else if (mode == "onehot") {
    const auto fm = disco::one_hot_annotators(ds.num_annotators());
    disco::save_embeddings(fm, ds.annotator_ids(), out_path);
    disco::log_info("wrote one-hot annotator features (N=", ds.num_annotators(), ") to ",
                    out_path);
  } else {
    throw std::runtime_error("featurize: mode must be 'hashed' or 'onehot'");
  }
  return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& item_feats_path,
              const std::string& annot_feats_path, const std::string& config_path,
              const std::string& out_path, const std::string& report_path,
              const std::string& resume_path, std::size_t threads) {
  const auto ds = disco::load_dataset(dataset_path);
  const auto item_feats = disco::load_embeddings(item_feats_path, ds.item_ids());
  const auto annot_feats = disco::load_embeddings(annot_feats_path, ds.annotator_ids());

  const ojson cfg_json = load_json_file(config_path);
  disco::TrainConfig tc = cfg_json.contains("train")
                              ? train_config_from_json(cfg_json["train"])
                              : disco::TrainConfig{};
  tc.threads = threads;

  disco::TrainResult result;
  if (!resume_path.empty()) {
    result = disco::resume(resume_path, ds, item_feats, annot_feats, tc);
  } else {
    disco::DiscoConfig cfg = cfg_json.contains("model")
                                 ? model_config_from_json(cfg_json["model"])
                                 : disco::DiscoConfig{};
    if (cfg.item_input_dim == 0) cfg.item_input_dim = item_feats.dim;
    if (cfg.annot_input_dim == 0) cfg.annot_input_dim = annot_feats.dim;
    if (cfg.num_classes == 0) cfg.num_classes = ds.num_classes();
    result = disco::train(ds, item_feats, annot_feats, cfg, tc);
  }

  disco::save_checkpoint(result.state, out_path);
  if (!report_path.empty()) result.report.save_csv(report_path);
  if (!result.report.epochs.empty()) {
    disco::log_info("trained ", result.report.epochs.size(), " epochs; final loss=",
                    result.report.epochs.back().loss,
                    " best_epoch=", result.report.best_epoch);
  }
  std::cout << "checkpoint written to " << out_path << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& dataset_path,
                const std::string& item_feats_path, const std::string& annot_feats_path,
                const std::string& agg_name, const std::string& split_name,
                const std::string& out_path, std::size_t threads) {
  const auto ck = disco::load_checkpoint(ckpt_path);
  const auto ds = disco::load_dataset(dataset_path);
  const auto split = disco::split_from_string(split_name);
  const auto view = disco::split_view(ds, split);
  const auto item_feats = disco::load_embeddings(item_feats_path, view.item_ids());
  const auto annot_feats = disco::load_embeddings(annot_feats_path, ds.annotator_ids());
  const auto agg = disco::aggregation_from_string(agg_name);
  if (ck.config.num_classes != ds.num_classes())
    throw std::runtime_error("checkpoint and dataset disagree on the number of classes");

  // Model selection may have stored a best-epoch snapshot; prefer it.
  const disco::DiscoParams& params = ck.has_best ? ck.best_params : ck.params;
  const auto seen = annotators_seen_in_train(ds);
  const auto preds =
      disco::predict_tasks(view, item_feats, annot_feats, params, ck.config, agg, &seen,
                           threads);
  disco::save_predictions(preds, ds.label_space, out_path);
  disco::log_info("predicted ", preds.soft.size(), " items / ", view.records.size(),
                  " pairs on split '", split_name, "'");
  return 0;
}

int cmd_evaluate(const std::string& preds_path, const std::string& dataset_path,
                 const std::string& task_a, const std::string& task_b, bool normalized,
                 const std::string& split_name, const std::string& out_path) {
  const auto ds = disco::load_dataset(dataset_path);
  const auto view = disco::split_view(ds, disco::split_from_string(split_name));
  const auto preds = disco::load_predictions(preds_path, ds.label_space);

  disco::EvalConfig cfg;
  cfg.soft = disco::soft_metric_from_string(task_a);
  cfg.pe = disco::pe_metric_from_string(task_b);
  cfg.normalized = normalized;
  const auto report = disco::evaluate(preds, view, cfg);
  if (!out_path.empty()) disco::save_score_report(report, out_path);
  std::cout << "task_a " << report.task_a_metric << " " << report.task_a_mean << " over "
            << report.task_a_items << " items\n"
            << "task_b " << report.task_b_metric << " " << report.task_b_mean << " over "
            << report.task_b_pairs << " pairs\n";
  return 0;
}

int cmd_diagnose(const std::string& preds_path, const std::string& dataset_path,
                 const std::string& task_a, const std::string& task_b, bool normalized,
                 std::size_t bins, double quantile, const std::string& split_name,
                 const std::string& out_dir) {
  const auto ds = disco::load_dataset(dataset_path);
  const auto view = disco::split_view(ds, disco::split_from_string(split_name));
  const auto preds = disco::load_predictions(preds_path, ds.label_space);

  disco::EvalConfig cfg;
  cfg.soft = disco::soft_metric_from_string(task_a);
  cfg.pe = disco::pe_metric_from_string(task_b);
  cfg.normalized = normalized;
  const auto report = disco::evaluate(preds, view, cfg);

  std::map<std::string, disco::Histogram> gold_hists;
  const auto hists = disco::item_histograms(view);
  for (std::size_t m = 0; m < view.num_items(); ++m) {
    if (hists[m].valid()) gold_hists[view.items[m].item_id] = hists[m];
  }
  const auto golds = disco::gold_pair_labels(view);

  std::filesystem::create_directories(out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  disco::write_calibration_csv(
      disco::calibration_table(report.task_a_per_item, gold_hists, bins),
      path("calibration.csv"));
  disco::write_annotator_error_csv(
      disco::annotator_error_table(preds.perspectivist, golds, ds.label_space, cfg.pe,
                                   cfg.normalized),
      path("annotator_error.csv"));
  disco::write_covariates_csv(
      disco::error_vs_covariates(view.items, report.task_a_per_item, gold_hists),
      path("covariates.csv"));
  if (report.task_a_per_item.size() >= 4) {
    const auto tokens =
        disco::hard_easy_tokens(view.items, report.task_a_per_item, quantile);
    if (tokens.degenerate)
      disco::log_info("all per-item errors equal; token tables cover the full item set");
    disco::write_token_csv(tokens.hard, path("tokens_hard.csv"));
    disco::write_token_csv(tokens.easy, path("tokens_easy.csv"));
  } else {
    disco::log_info("fewer than 4 scored items; skipping tokens_hard.csv and tokens_easy.csv");
  }

  if (ds.label_space.ordinal) {
    disco::write_label_error_csv(
        disco::per_label_error(preds.perspectivist, golds, ds.label_space),
        path("per_label_error.csv"));
    disco::write_nad_csv(
        disco::nad_distribution(
            disco::per_item_nad_scores(preds.perspectivist, golds, ds.label_space), bins),
        path("nad_hist.csv"));
  } else {
    disco::log_info("label space is categorical; skipping per_label_error.csv and nad_hist.csv");
  }
  std::cout << "diagnostics written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DisCo: disagreement-aware label distribution modeling"};
  app.require_subcommand(1);

  std::size_t threads = 1;
  app.add_option("--threads", threads, "worker thread cap")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "generator spec JSON")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  // check
  auto* check = app.add_subcommand("check", "validate a dataset file and print stats");
  std::string check_path;
  check->add_option("dataset", check_path, "dataset JSON")->required();

  // featurize
  auto* feat = app.add_subcommand("featurize", "produce feature files from a dataset");
  std::string feat_dataset, feat_mode = "hashed", feat_out, feat_template;
  std::size_t feat_dim = 256;
  bool feat_render = false;
  feat->add_option("--dataset", feat_dataset, "dataset JSON")->required();
  feat->add_option("--mode", feat_mode, "hashed|onehot")->capture_default_str();
  feat->add_option("--dim", feat_dim, "hashed feature dimension")->capture_default_str();
  feat->add_option("--out", feat_out, "output TSV")->required();
  feat->add_flag("--render-metadata", feat_render,
                 "emit one metadata sentence per annotator instead of features");
  feat->add_option("--template", feat_template, "metadata sentence template");

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string tr_dataset, tr_item, tr_annot, tr_config, tr_out, tr_report, tr_resume;
  train->add_option("--dataset", tr_dataset, "dataset JSON")->required();
  train->add_option("--item-feats", tr_item, "item embeddings TSV")->required();
  train->add_option("--annot-feats", tr_annot, "annotator embeddings TSV")->required();
  train->add_option("--config", tr_config, "model+train config JSON")->required();
  train->add_option("--out", tr_out, "output checkpoint")->required();
  train->add_option("--report", tr_report, "training report CSV");
  train->add_option("--resume", tr_resume, "checkpoint to continue from");

  // predict
  auto* pred = app.add_subcommand("predict", "run inference");
  std::string pr_ckpt, pr_dataset, pr_item, pr_annot, pr_agg = "expectation",
                                                      pr_split = "test", pr_out;
  pred->add_option("--ckpt", pr_ckpt, "model checkpoint")->required();
  pred->add_option("--dataset", pr_dataset, "dataset JSON")->required();
  pred->add_option("--item-feats", pr_item, "item embeddings TSV")->required();
  pred->add_option("--annot-feats", pr_annot, "annotator embeddings TSV")->required();
  pred->add_option("--agg", pr_agg, "expectation|majority")->capture_default_str();
  pred->add_option("--split", pr_split, "train|dev|test")->capture_default_str();
  pred->add_option("--out", pr_out, "predictions JSON")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score predictions against gold labels");
  std::string ev_preds, ev_dataset, ev_task_a = "manhattan", ev_task_b = "error_rate",
                                    ev_split = "test", ev_out;
  bool ev_norm = false;
  eval->add_option("--preds", ev_preds, "predictions JSON")->required();
  eval->add_option("--dataset", ev_dataset, "dataset JSON")->required();
  eval->add_option("--task-a", ev_task_a, "manhattan|wasserstein")->capture_default_str();
  eval->add_option("--task-b", ev_task_b, "error_rate|abs_distance")->capture_default_str();
  eval->add_flag("--normalized", ev_norm, "normalize absolute distance by the value range");
  eval->add_option("--split", ev_split, "train|dev|test")->capture_default_str();
  eval->add_option("--out", ev_out, "score report JSON");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "emit the diagnostics CSV tables");
  std::string dg_preds, dg_dataset, dg_task_a = "manhattan", dg_task_b = "error_rate",
                                    dg_split = "test", dg_out;
  bool dg_norm = false;
  std::size_t dg_bins = 10;
  double dg_quantile = 0.25;
  diag->add_option("--preds", dg_preds, "predictions JSON")->required();
  diag->add_option("--dataset", dg_dataset, "dataset JSON")->required();
  diag->add_option("--task-a", dg_task_a, "manhattan|wasserstein")->capture_default_str();
  diag->add_option("--task-b", dg_task_b, "error_rate|abs_distance")->capture_default_str();
  diag->add_flag("--normalized", dg_norm, "normalize absolute distance by the value range");
  diag->add_option("--bins", dg_bins, "histogram bins")->capture_default_str();
  diag->add_option("--quantile", dg_quantile, "hard/easy split quantile")
      ->capture_default_str();
  diag->add_option("--split", dg_split, "train|dev|test")->capture_default_str();
  diag->add_option("--out-dir", dg_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints usage to stderr
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_spec, synth_out);
    if (check->parsed()) return cmd_check(check_path);
    if (feat->parsed())
      return cmd_featurize(feat_dataset, feat_mode, feat_dim, feat_out, feat_render,
                           feat_template);
    if (train->parsed())
      return cmd_train(tr_dataset, tr_item, tr_annot, tr_config, tr_out, tr_report,
                       tr_resume, threads);
    if (pred->parsed())
      return cmd_predict(pr_ckpt, pr_dataset, pr_item, pr_annot, pr_agg, pr_split, pr_out,
                         threads);
    if (eval->parsed())
      return cmd_evaluate(ev_preds, ev_dataset, ev_task_a, ev_task_b, ev_norm, ev_split,
                          ev_out);
    if (diag->parsed())
      return cmd_diagnose(dg_preds, dg_dataset, dg_task_a, dg_task_b, dg_norm, dg_bins,
                          dg_quantile, dg_split, dg_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
