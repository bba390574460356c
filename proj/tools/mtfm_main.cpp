// mtfm — command-line entry point: data generation, training, evaluation,
// inference, verification and benchmarking.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config errors.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mtfm/bench.hpp"
#include "mtfm/checkpoint.hpp"
#include "mtfm/dataset_io.hpp"
#include "mtfm/log.hpp"
#include "mtfm/metrics.hpp"
#include "mtfm/subgraph.hpp"
#include "mtfm/trace_io.hpp"
#include "mtfm/train.hpp"
#include "mtfm/verify.hpp"

namespace {

using json = nlohmann::json;
using namespace mtfm;

// ---------------------------------------------------------------------------
// Config file handling. Precedence: CLI flags > config file > defaults.
// Unknown keys are rejected.
// ---------------------------------------------------------------------------

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config file not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::exception& e) {
        throw config_error("malformed config " + path + ": " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
    if (j.is_null()) return;
    if (!j.is_object()) throw config_error(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) ok = true;
        if (!ok) throw config_error(where + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
void pick(const json& j, const char* key, T& into) {
    if (!j.is_null() && j.contains(key)) into = j.at(key).get<T>();
}

GeneratorConfig generator_from_json(const json& j) {
    reject_unknown(j,
                   {"n_scenarios", "n_users", "n_hist_seqs", "n_rt_seqs", "seq_len_min",
                    "seq_len_max", "exposures_min", "exposures_max", "positive_rate", "cvr_rate",
                    "noise", "base_vocab", "item_vocab", "latent_dim", "signal_linear",
                    "signal_bilinear", "seed"},
                   "generator config");
    GeneratorConfig g;
    pick(j, "n_scenarios", g.n_scenarios);
    pick(j, "n_users", g.n_users);
    pick(j, "n_hist_seqs", g.n_hist_seqs);
    pick(j, "n_rt_seqs", g.n_rt_seqs);
    pick(j, "seq_len_min", g.seq_len_min);
    pick(j, "seq_len_max", g.seq_len_max);
    pick(j, "exposures_min", g.exposures_min);
    pick(j, "exposures_max", g.exposures_max);
    pick(j, "positive_rate", g.positive_rate);
    pick(j, "cvr_rate", g.cvr_rate);
    pick(j, "noise", g.noise);
    pick(j, "base_vocab", g.base_vocab);
    pick(j, "item_vocab", g.item_vocab);
    pick(j, "latent_dim", g.latent_dim);
    pick(j, "signal_linear", g.signal_linear);
    pick(j, "signal_bilinear", g.signal_bilinear);
    pick(j, "seed", g.seed);
    return g;
}

void model_from_json(const json& j, ModelConfig& m) {
    reject_unknown(j,
                   {"d_model", "blocks", "target_layers", "full_layers", "heads", "kv_heads",
                    "norm", "eps", "d_emb", "experts", "d_expert"},
                   "model config");
    pick(j, "d_model", m.hta.d_model);
    pick(j, "blocks", m.hta.blocks);
    pick(j, "target_layers", m.hta.target_layers);
    pick(j, "full_layers", m.hta.full_layers);
    pick(j, "heads", m.hta.heads);
    pick(j, "kv_heads", m.hta.kv_heads);
    if (!j.is_null() && j.contains("norm")) m.hta.norm = attn_norm_from_string(j.at("norm").get<std::string>());
    pick(j, "eps", m.hta.eps);
    pick(j, "d_emb", m.d_emb);
    pick(j, "experts", m.experts);
    pick(j, "d_expert", m.d_expert);
}

void train_from_json(const json& j, TrainConfig& t) {
    reject_unknown(j,
                   {"steps", "batch", "lr", "beta1", "beta2", "adam_eps", "clip_norm", "seed",
                    "threads", "holdout_fraction", "eval_every"},
                   "train config");
    pick(j, "steps", t.steps);
    pick(j, "batch", t.batch_size);
    pick(j, "lr", t.adam.lr);
    pick(j, "beta1", t.adam.beta1);
    pick(j, "beta2", t.adam.beta2);
    pick(j, "adam_eps", t.adam.eps);
    pick(j, "clip_norm", t.adam.clip_norm);
    pick(j, "seed", t.seed);
    pick(j, "threads", t.threads);
    pick(j, "holdout_fraction", t.holdout_fraction);
    pick(j, "eval_every", t.eval_every);
}

struct CommonArgs {
    std::string config_path;
    std::string precision = "f32";
    int threads = 1;
    uint64_t seed = 1234;
    bool seed_set = false;
    bool threads_set = false;
};

json config_section(const CommonArgs& c, const char* section) {
    if (c.config_path.empty()) return json();
    json root = load_config_file(c.config_path);
    reject_unknown(root, {"generator", "model", "train", "bench"}, "config");
    return root.contains(section) ? root.at(section) : json();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open for write: " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// Subcommand implementations (templated on precision where models exist).
// ---------------------------------------------------------------------------

int cmd_gen_data(const CommonArgs& common, const std::string& out_path) {
    GeneratorConfig gc = generator_from_json(config_section(common, "generator"));
    if (common.seed_set) gc.seed = common.seed;
    Dataset d = generate_dataset(gc);
    save_dataset(d, out_path);
    size_t n_exp = 0;
    for (const auto& s : d.samples) n_exp += s.exposures.size();
    log_info("gen-data: %zu users, %zu exposures, %zu scenarios -> %s", d.samples.size(), n_exp,
             d.scenarios.size(), out_path.c_str());
    for (const auto& [key, rate] : label_marginals(d))
        log_debug("marginal scenario=%d task=%s rate=%.4f", key.first, key.second.c_str(), rate);
    return 0;
}

template <typename Real>
int cmd_train(const CommonArgs& common, const std::string& data_path, const std::string& out_path,
              const std::string& report_dir, ModelConfig mc, TrainConfig tc) {
    if (common.seed_set) tc.seed = common.seed;
    if (common.threads_set) tc.threads = common.threads;
    mc.validate();
    tc.validate();

    Dataset data = load_dataset(data_path);
    auto model = Model<Real>::build(SchemaSet::from(data), mc, tc.seed);
    log_info("train: %zu samples, %zu parameters, stack %s, precision %s", data.samples.size(),
             model.params.scalar_count(), mc.hta.shape_label().c_str(),
             sizeof(Real) == 4 ? "f32" : "f64");

    Trainer<Real> trainer(model, data, tc);
    TrainResult res = trainer.run();

    if (!res.loss_history.empty())
        log_info("train: first loss %.6f, last loss %.6f", res.loss_history.front(),
                 res.loss_history.back());

    if (!report_dir.empty()) {
        std::filesystem::create_directories(report_dir);
        std::ostringstream rc;
        rc << "precision=" << (sizeof(Real) == 4 ? "f32" : "f64") << " seed=" << tc.seed
           << " threads=" << tc.threads << " steps=" << tc.steps << " batch=" << tc.batch_size
           << " lr=" << tc.adam.lr << " clip_norm=" << tc.adam.clip_norm
           << " holdout=" << tc.holdout_fraction << " stack=" << mc.hta.shape_label()
           << " d_model=" << mc.hta.d_model << " heads=" << mc.hta.heads
           << " kv_heads=" << mc.hta.kv_heads << "\n";
        write_text_file(report_dir + "/run_config.txt", rc.str());

        std::ostringstream loss;
        loss << "step\tloss\n";
        char buf[64];
        for (size_t i = 0; i < res.loss_history.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu\t%.17g\n", i + 1, res.loss_history[i]);
            loss << buf;
        }
        write_text_file(report_dir + "/loss.tsv", loss.str());

        std::ostringstream evals;
        evals << "step\tscenario\ttask\tn\tauc\tgauc\n";
        for (const auto& ep : res.evals) {
            for (const auto& m : ep.metrics) {
                std::snprintf(buf, sizeof(buf), "%d\t%d\t%s\t%zu\t", ep.step, m.scenario_id,
                              m.task.c_str(), m.n_records);
                evals << buf << (m.auc ? std::to_string(*m.auc) : "n/a") << "\t"
                      << (m.gauc ? std::to_string(*m.gauc) : "n/a") << "\n";
            }
        }
        write_text_file(report_dir + "/evals.tsv", evals.str());
    }

    if (!res.evals.empty()) {
        std::cout << "holdout metrics (step " << res.evals.back().step << "):\n"
                  << format_metrics_table(res.evals.back().metrics);
    }
    if (!out_path.empty()) {
        save_checkpoint(model, out_path);
        log_info("train: checkpoint written to %s", out_path.c_str());
    }
    return 0;
}

template <typename Real>
int cmd_eval(const CommonArgs& common, const std::string& data_path, const std::string& ckpt_path,
             const std::string& out_path) {
    Dataset data = load_dataset(data_path);
    auto model = load_checkpoint<Real>(ckpt_path);
    if (SchemaSet::from(data) != model.schemas)
        throw config_error("eval: dataset schemas do not match checkpoint schemas");

    TrainConfig tc;
    tc.threads = common.threads;
    tc.holdout_fraction = 0.0;
    Trainer<Real> scorer(model, data, tc);
    std::vector<PredictionRecord> records;
    for (const auto* s : scorer.train_samples())
        for (auto& r : model.forward_sample(*s)) records.push_back(std::move(r));
    std::string table = format_metrics_table(evaluate_by_task(records));
    std::cout << table;
    if (!out_path.empty()) write_text_file(out_path, table);
    return 0;
}

template <typename Real>
int cmd_infer(const std::string& ckpt_path, const std::string& request_path,
              const std::string& out_path, const std::string& trace_path) {
    auto model = load_checkpoint<Real>(ckpt_path);
    InferenceRequest req = load_request(request_path);
    Dataset schema_ctx;
    schema_ctx.hist_seq_schemas = model.schemas.hist;
    schema_ctx.rt_seq_schemas = model.schemas.rt;
    schema_ctx.scenarios = model.schemas.scenarios;
    validate_request(schema_ctx, req);

    auto sub = extract_subgraph(model, req.scenario_id);
    TraceSink<Real> trace;
    auto records = infer_request(model, sub, req, trace_path.empty() ? nullptr : &trace);

    std::ostringstream out;
    out << "candidate\ttask\tprobability\n";
    char buf[96];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%d\t%s\t%.9f\n", r.exposure_index, r.task.c_str(),
                      r.probability);
        out << buf;
    }
    std::cout << out.str();
    if (!out_path.empty()) write_text_file(out_path, out.str());
    if (!trace_path.empty()) {
        std::ofstream tf(trace_path, std::ios::binary);
        if (!tf) throw config_error("cannot open trace file: " + trace_path);
        write_trace(trace, tf);
        log_info("infer: wrote %zu attention matrices to %s", trace.entries.size(),
                 trace_path.c_str());
    }
    return 0;
}

int cmd_bench(const CommonArgs& common, const std::string& out_path, const std::string& sizes_arg,
              const std::string& matrix_arg, int reps, int d_model, int blocks, int heads) {
    BenchConfig bc;
    bc.threads = common.threads;
    bc.reps = reps;
    if (matrix_arg.empty()) {
        bc.configs = default_bench_configs(d_model, blocks, heads);
    } else {
        // "--matrix 0:1,3:1,3:0" with GQA and MHA variants of each shape.
        std::istringstream ss(matrix_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw config_error("bench matrix: expected K:P entries, got " + tok);
            for (int g : {heads, 1}) {
                HTAConfig c;
                c.d_model = d_model;
                c.blocks = blocks;
                c.heads = heads;
                c.kv_heads = g;
                c.target_layers = std::stoi(tok.substr(0, colon));
                c.full_layers = std::stoi(tok.substr(colon + 1));
                bc.configs.push_back(c);
            }
        }
    }
    if (!sizes_arg.empty()) {
        bc.sizes.clear();
        std::istringstream ss(sizes_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            auto x = tok.find('x');
            if (x == std::string::npos) throw config_error("bench sizes: expected NxL_T, got " + tok);
            bc.sizes.emplace_back(std::stoul(tok.substr(0, x)), std::stoul(tok.substr(x + 1)));
        }
    }
    auto rows = run_bench<float>(bc);
    std::string table = format_bench_table(rows);
    std::cout << table;
    if (!out_path.empty()) write_text_file(out_path, table);

    bool exact = true;
    for (const auto& r : rows) exact = exact && r.macs_exact;
    if (!check_mac_monotonicity(rows)) {
        std::cerr << "bench: attention-MAC ordering violated\n";
        return 1;
    }
    if (!exact) {
        std::cerr << "bench: instrumented MAC counts diverged from the analytic model\n";
        return 1;
    }
    return 0;
}

int cmd_verify(bool masks, bool layers, bool gqa, bool grad, bool agg, bool subgraph, bool macs) {
    const bool any = masks || layers || gqa || grad || agg || subgraph || macs;
    std::vector<CheckResult> results;
    auto want = [&](bool flag) { return !any || flag; };
    if (want(masks)) results.push_back(verify_masks());
    if (want(layers)) results.push_back(verify_restriction());
    if (want(gqa)) results.push_back(verify_gqa());
    if (want(grad)) results.push_back(verify_gradients());
    if (want(agg)) results.push_back(verify_aggregation());
    if (want(subgraph)) results.push_back(verify_subgraph());
    if (want(macs)) results.push_back(verify_macs());

    bool all_pass = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << ": " << r.detail << "\n";
        all_pass = all_pass && r.pass;
    }
    std::cout << (all_pass ? "verify: all checks passed\n" : "verify: FAILURES present\n");
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mtfm — multi-scenario recommendation model workbench"};
    app.require_subcommand(1);

    CommonArgs common;
    app.add_option("--config", common.config_path, "JSON config file (strict keys)");
    app.add_option("--precision", common.precision, "numeric precision: f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));
    auto* seed_opt = app.add_option("--seed", common.seed, "seed override");
    auto* thr_opt = app.add_option("--threads", common.threads, "worker thread count");

    app.fallthrough();  // let --seed/--config/... be given after the subcommand

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic multi-scenario dataset");
    std::string gen_out = "dataset.mtfm";
    gen->add_option("--out", gen_out, "output dataset path");

    // train
    auto* train = app.add_subcommand("train", "train a model on an aggregated dataset");
    std::string train_data, train_out = "model.ckpt", train_report;
    train->add_option("--data", train_data, "dataset path")->required();
    train->add_option("--out", train_out, "checkpoint output path");
    train->add_option("--report", train_report, "report directory (loss/eval history)");
    ModelConfig mc_flags;
    TrainConfig tc_flags;
    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--d-model", mc_flags.hta.d_model);
        cmd->add_option("--blocks", mc_flags.hta.blocks);
        cmd->add_option("--target-layers", mc_flags.hta.target_layers);
        cmd->add_option("--full-layers", mc_flags.hta.full_layers);
        cmd->add_option("--heads", mc_flags.hta.heads);
        cmd->add_option("--kv-heads", mc_flags.hta.kv_heads);
        cmd->add_option("--d-emb", mc_flags.d_emb);
        cmd->add_option("--experts", mc_flags.experts);
        cmd->add_option("--d-expert", mc_flags.d_expert);
        cmd->add_option("--norm", [&](const std::vector<std::string>& v) {
            mc_flags.hta.norm = attn_norm_from_string(v.at(0));
            return true;
        }, "attention scaling: valid|seqlen|none");
    };
    add_model_flags(train);
    train->add_option("--steps", tc_flags.steps);
    train->add_option("--batch", tc_flags.batch_size);
    train->add_option("--lr", tc_flags.adam.lr);
    train->add_option("--clip-norm", tc_flags.adam.clip_norm);
    train->add_option("--holdout", tc_flags.holdout_fraction);
    train->add_option("--eval-every", tc_flags.eval_every);

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_data, eval_ckpt, eval_out;
    eval->add_option("--data", eval_data)->required();
    eval->add_option("--ckpt", eval_ckpt)->required();
    eval->add_option("--out", eval_out, "write the metrics table here too");

    // infer
    auto* infer = app.add_subcommand("infer", "score one request through a scenario subgraph");
    std::string infer_ckpt, infer_req, infer_out, infer_trace;
    infer->add_option("--ckpt", infer_ckpt)->required();
    infer->add_option("--request", infer_req, "request JSON file")->required();
    infer->add_option("--out", infer_out);
    infer->add_option("--trace", infer_trace, "attention trace dump path");

    // bench
    auto* bench = app.add_subcommand("bench", "stack configuration benchmark");
    std::string bench_out, bench_sizes, bench_matrix;
    int bench_reps = 3, bench_dmodel = 64, bench_blocks = 4, bench_heads = 4;
    bench->add_option("--out", bench_out);
    bench->add_option("--sizes", bench_sizes, "comma list of NxL_T, e.g. 256x16,1024x32");
    bench->add_option("--matrix", bench_matrix, "comma list of K:P block shapes, e.g. 0:1,3:1,3:0");
    bench->add_option("--reps", bench_reps);
    bench->add_option("--d-model", bench_dmodel);
    bench->add_option("--blocks", bench_blocks);
    bench->add_option("--heads", bench_heads);

    // verify
    auto* verify = app.add_subcommand("verify", "run the oracle / equivalence suites");
    bool v_masks = false, v_layers = false, v_gqa = false, v_grad = false, v_agg = false,
         v_sub = false, v_macs = false;
    verify->add_flag("--masks", v_masks, "mask oracle comparison");
    verify->add_flag("--layers", v_layers, "target/full restriction equivalence");
    verify->add_flag("--gqa", v_gqa, "GQA degeneracy vs MHA reference");
    verify->add_flag("--grad", v_grad, "finite-difference gradient check");
    verify->add_flag("--agg", v_agg, "aggregation/singleton equivalence");
    verify->add_flag("--subgraph", v_sub, "scenario subgraph equivalence");
    verify->add_flag("--macs", v_macs, "MAC accounting exactness + complexity ratio");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 2;
    }

    common.seed_set = seed_opt->count() > 0;
    common.threads_set = thr_opt->count() > 0;
    const bool f64 = common.precision == "f64";

    try {
        if (gen->parsed()) return cmd_gen_data(common, gen_out);
        if (train->parsed()) {
            ModelConfig mc;
            TrainConfig tc;
            model_from_json(config_section(common, "model"), mc);
            train_from_json(config_section(common, "train"), tc);
            // Flags override the file: merge any explicitly set flag values.
            auto merge_int = [](CLI::Option* o, int flag_v, int& dst) {
                if (o && o->count() > 0) dst = flag_v;
            };
            merge_int(train->get_option("--d-model"), mc_flags.hta.d_model, mc.hta.d_model);
            merge_int(train->get_option("--blocks"), mc_flags.hta.blocks, mc.hta.blocks);
            merge_int(train->get_option("--target-layers"), mc_flags.hta.target_layers, mc.hta.target_layers);
            merge_int(train->get_option("--full-layers"), mc_flags.hta.full_layers, mc.hta.full_layers);
            merge_int(train->get_option("--heads"), mc_flags.hta.heads, mc.hta.heads);
            merge_int(train->get_option("--kv-heads"), mc_flags.hta.kv_heads, mc.hta.kv_heads);
            merge_int(train->get_option("--d-emb"), mc_flags.d_emb, mc.d_emb);
            merge_int(train->get_option("--experts"), mc_flags.experts, mc.experts);
            merge_int(train->get_option("--d-expert"), mc_flags.d_expert, mc.d_expert);
            if (train->get_option("--norm")->count() > 0) mc.hta.norm = mc_flags.hta.norm;
            merge_int(train->get_option("--steps"), tc_flags.steps, tc.steps);
            merge_int(train->get_option("--batch"), tc_flags.batch_size, tc.batch_size);
            if (train->get_option("--lr")->count() > 0) tc.adam.lr = tc_flags.adam.lr;
            if (train->get_option("--clip-norm")->count() > 0) tc.adam.clip_norm = tc_flags.adam.clip_norm;
            if (train->get_option("--holdout")->count() > 0) tc.holdout_fraction = tc_flags.holdout_fraction;
            merge_int(train->get_option("--eval-every"), tc_flags.eval_every, tc.eval_every);

            return f64 ? cmd_train<double>(common, train_data, train_out, train_report, mc, tc)
                       : cmd_train<float>(common, train_data, train_out, train_report, mc, tc);
        }
        if (eval->parsed())
            return f64 ? cmd_eval<double>(common, eval_data, eval_ckpt, eval_out)
                       : cmd_eval<float>(common, eval_data, eval_ckpt, eval_out);
        if (infer->parsed())
            return f64 ? cmd_infer<double>(infer_ckpt, infer_req, infer_out, infer_trace)
                       : cmd_infer<float>(infer_ckpt, infer_req, infer_out, infer_trace);
        if (bench->parsed())
            return cmd_bench(common, bench_out, bench_sizes, bench_matrix, bench_reps, bench_dmodel,
                             bench_blocks, bench_heads);
        if (verify->parsed())
            return cmd_verify(v_masks, v_layers, v_gqa, v_grad, v_agg, v_sub, v_macs);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
