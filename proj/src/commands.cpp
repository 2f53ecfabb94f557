#include "jem/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "jem/checkpoint.hpp"
#include "jem/config.hpp"
#include "jem/eval.hpp"
#include "jem/robustness.hpp"
#include "jem/trainer.hpp"

namespace jem {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "seed",
    "threads",
    "dataset.generator", "dataset.k", "dataset.n", "dataset.scale",
    "dataset.sigma", "dataset.cells", "dataset.path", "dataset.format",
    "dataset.noise_std", "dataset.renoise", "dataset.val_fraction",
    "net.hidden_layers", "net.width", "net.activation",
    "train.lr", "train.decay_factor", "train.decay_epochs", "train.epochs",
    "train.batch_size", "train.objective", "train.gen_weight",
    "train.divergence_threshold", "train.divergence_window",
    "train.max_restarts",
    "sampler.alpha", "sampler.sigma", "sampler.eta", "sampler.rho",
    "sampler.init", "sampler.proper", "sampler.buffer_capacity",
    "attack.norm", "attack.pgd_iters", "attack.restarts", "attack.eot_samples",
    "attack.refine_steps", "attack.bsearch_iters", "attack.eps_max",
    "attack.step_factor", "attack.n_inputs", "attack.pointwise",
    "attack.pointwise_inputs", "attack.transfer_ks",
    "ood.sets", "ood.scores", "ood.n",
    "distal.n", "distal.conf_target", "distal.max_iters", "distal.step_size",
    "sample.method", "sample.n", "sample.steps",
};

void validate_keys(const RunConfig& cfg) {
    // reimplemented via resolved() parse to avoid exposing the raw map
    std::stringstream ss(cfg.resolved());
    std::string line;
    while (std::getline(ss, line)) {
        auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        if (!kKnownKeys.count(key)) throw ConfigError("unknown config key: " + key);
    }
}

struct Run {
    RunConfig cfg;
    std::uint64_t seed = 0;
    DatasetSpec dspec;
    double noise_std = 0.03;
    bool renoise = true;
    double val_fraction = 0.1;
    std::uint64_t dataset_hash = 0;
};

Run load_run(const CommandOpts& opts) {
    Run r;
    r.cfg = RunConfig::load(opts.config_path);
    validate_keys(r.cfg);
    if (opts.seed) r.cfg.set("seed", std::to_string(*opts.seed));
    r.seed = r.cfg.get_u64("seed");
    int threads = opts.threads > 0 ? opts.threads : r.cfg.get_int("threads", 0);
    set_threads(threads);

    r.dspec.generator = generator_from_name(r.cfg.get_str("dataset.generator"));
    r.dspec.k = r.cfg.get_int("dataset.k", 4);
    r.dspec.n = r.cfg.get_int("dataset.n", 400);
    r.dspec.scale = r.cfg.get_double("dataset.scale", 1.0);
    r.dspec.sigma = r.cfg.get_double("dataset.sigma", 0.1);
    r.dspec.cells = r.cfg.get_int("dataset.cells", 4);
    r.dspec.path = r.cfg.get_str("dataset.path", "");
    r.dspec.format = r.cfg.get_str("dataset.format", "csv");
    r.noise_std = r.cfg.get_double("dataset.noise_std", 0.03);
    r.renoise = r.cfg.get_bool("dataset.renoise", true);
    r.val_fraction = r.cfg.get_double("dataset.val_fraction", 0.1);

    std::string stamp = generator_name(r.dspec.generator) + "|" +
                        std::to_string(r.dspec.k) + "|" +
                        std::to_string(r.dspec.n) + "|" +
                        std::to_string(r.dspec.scale) + "|" +
                        std::to_string(r.dspec.sigma) + "|" +
                        std::to_string(r.dspec.cells) + "|" + r.dspec.path + "|" +
                        std::to_string(r.seed);
    r.dataset_hash = fnv1a(stamp);
    return r;
}

LabeledDataset build_dataset(const Run& r) {
    Rng gen_rng = Rng::derive(r.seed, 0xDA7A);
    LabeledDataset ds = generate(r.dspec, gen_rng);
    Rng pre_rng = Rng::derive(r.seed, 0xDA7B);
    preprocess(ds, pre_rng, r.noise_std, r.renoise);
    return ds;
}

SamplerConfig sampler_config(Run& r, bool required) {
    SamplerConfig sc;
    if (required) {
        sc.alpha = r.cfg.get_double("sampler.alpha");
        sc.sigma = r.cfg.get_double("sampler.sigma");
        sc.eta = r.cfg.get_int("sampler.eta");
        sc.rho = r.cfg.get_double("sampler.rho");
    } else {
        sc.alpha = r.cfg.get_double("sampler.alpha", 1.0);
        sc.sigma = r.cfg.get_double("sampler.sigma", 0.01);
        sc.eta = r.cfg.get_int("sampler.eta", 20);
        sc.rho = r.cfg.get_double("sampler.rho", 0.05);
    }
    std::string init = r.cfg.get_str("sampler.init", "uniform");
    if (init == "uniform")
        sc.init = InitDist::UniformBox;
    else if (init == "normal")
        sc.init = InitDist::Normal;
    else
        throw ConfigError("config key sampler.init: unknown value " + init);
    sc.proper_mode = r.cfg.get_bool("sampler.proper", false);
    return sc;
}

JemModel load_model(const std::string& checkpoint_path, Checkpoint* out = nullptr) {
    Checkpoint c = load_checkpoint(checkpoint_path);
    JemModel m;
    m.num_classes = c.snapshot.net.num_classes;
    m.net = c.snapshot.net;
    if (out) *out = std::move(c);
    return m;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
}

void echo_config(const Run& r, const fs::path& out) {
    write_text(out / "config.resolved", r.cfg.resolved());
}

json metrics_json(const EpochMetrics& em) {
    return json{{"epoch", em.epoch},
                {"train_acc", em.train_acc},
                {"val_acc", em.val_acc},
                {"e_data_mean", em.e_data_mean},
                {"e_neg_mean", em.e_neg_mean},
                {"l_clf", em.l_clf},
                {"l_gen", em.l_gen},
                {"lr", em.lr},
                {"restarts", em.restarts}};
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace

int cmd_train(const CommandOpts& opts) {
    return guarded([&]() -> int {
        Run r = load_run(opts);
        fs::create_directories(opts.out_dir);
        fs::path out(opts.out_dir);

        LabeledDataset full = build_dataset(r);
        SplitDataset parts = split(full, r.val_fraction, r.seed);

        TrainConfig tc;
        tc.lr = r.cfg.get_double("train.lr");
        tc.epochs = r.cfg.get_int("train.epochs");
        tc.batch_size = r.cfg.get_int("train.batch_size");
        tc.decay_factor = r.cfg.get_double("train.decay_factor", 0.3);
        if (r.cfg.has("train.decay_epochs"))
            tc.decay_epochs = r.cfg.get_int_list("train.decay_epochs");
        tc.objective =
            objective_from_name(r.cfg.get_str("train.objective", "joint_factored"));
        tc.gen_weight = r.cfg.get_double("train.gen_weight", 1.0);
        tc.divergence_threshold =
            r.cfg.get_double("train.divergence_threshold", 100.0);
        tc.divergence_window = r.cfg.get_int("train.divergence_window", 50);
        tc.max_restarts = r.cfg.get_int("train.max_restarts", 3);
        tc.noise_std = r.noise_std;
        tc.renoise = r.renoise;
        tc.sampler = sampler_config(r, true);
        tc.buffer_capacity = std::size_t(r.cfg.get_int("sampler.buffer_capacity", 10000));
        int net_hidden = r.cfg.get_int("net.hidden_layers");
        int net_width = r.cfg.get_int("net.width");
        auto net_act = activation_from_name(r.cfg.get_str("net.activation"));
        r.cfg.reject_unknown();
        echo_config(r, out);

        std::optional<TrainSnapshot> resume;
        if (opts.resume) {
            Checkpoint c = load_checkpoint((out / "ckpt_last.jemc").string());
            if (c.dataset_hash != r.dataset_hash)
                throw ConfigError("resume: dataset spec hash mismatch");
            resume = std::move(c.snapshot);
        }

        JemModel m;
        if (!resume) {
            Rng net_rng = Rng::derive(r.seed, 0x4E7);
            m.net = Network::mlp(full.dim(), std::size_t(full.num_classes),
                                 net_hidden, net_width, net_act, net_rng);
            m.num_classes = full.num_classes;
        }

        std::ofstream metrics((out / "metrics.jsonl").string(),
                              opts.resume ? std::ios::app : std::ios::trunc);
        double best_val = -1;
        TrainHooks hooks;
        hooks.on_epoch = [&](const TrainSnapshot& snap, const EpochMetrics& em) {
            metrics << metrics_json(em).dump() << "\n";
            metrics.flush();
            Checkpoint c;
            c.snapshot = snap;
            c.dataset_hash = r.dataset_hash;
            save_checkpoint(c, (out / "ckpt_last.jemc").string());
            save_checkpoint(
                c, (out / ("ckpt_epoch_" + std::to_string(em.epoch) + ".jemc"))
                       .string());
            if (em.val_acc >= best_val) {
                best_val = em.val_acc;
                save_checkpoint(c, (out / "ckpt_best.jemc").string());
            }
        };

        train(std::move(m), parts.train, parts.val, tc, r.seed, hooks,
              std::move(resume));
        return 0;
    });
}

int cmd_sample(const CommandOpts& opts, const std::string& checkpoint, int method,
               int n, int steps) {
    return guarded([&]() -> int {
        Run r = load_run(opts);
        fs::create_directories(opts.out_dir);
        fs::path out(opts.out_dir);
        SamplerConfig sc = sampler_config(r, false);
        if (method == 0) method = r.cfg.get_int("sample.method", 2);
        if (n == 0) n = r.cfg.get_int("sample.n", 100);
        if (steps < 0) steps = r.cfg.get_int("sample.steps", sc.eta);
        echo_config(r, out);

        JemModel m = load_model(checkpoint);
        if (method != 1 && method != 2)
            throw ConfigError("sample: method must be 1 or 2");
        Rng rng = Rng::derive(r.seed, 0x5A3);

        LabeledDataset samples;
        samples.num_classes = int(m.num_classes);
        samples.name = "samples";
        if (method == 1) {
            LabeledSamples ls = sample_px_method1(m, sc, rng, steps, n);
            samples.inputs = std::move(ls.states);
            samples.labels = std::move(ls.labels);
        } else {
            samples.inputs = sample_px_method2(m, sc, rng, steps, n);
            samples.labels.resize(n);
            for (int i = 0; i < n; ++i)
                samples.labels[i] = predict(m, samples.inputs.row(i));
        }
        save_jtb(samples, (out / "samples.jtb").string());
        if (samples.inputs.cols() == 2) {
            std::ostringstream ss;
            ss.precision(17);
            for (std::size_t i = 0; i < samples.size(); ++i)
                ss << samples.inputs.at(i, 0) << " " << samples.inputs.at(i, 1)
                   << " " << samples.labels[i] << "\n";
            write_text(out / "samples_scatter.txt", ss.str());
        }
        return 0;
    });
}

int cmd_eval(const CommandOpts& opts, const std::string& checkpoint) {
    return guarded([&]() -> int {
        Run r = load_run(opts);
        fs::create_directories(opts.out_dir);
        fs::path out(opts.out_dir);
        echo_config(r, out);

        JemModel m = load_model(checkpoint);
        LabeledDataset full = build_dataset(r);
        SplitDataset parts = split(full, r.val_fraction, r.seed);
        const LabeledDataset& ds = parts.val.size() ? parts.val : parts.train;

        std::vector<double> conf;
        std::vector<char> correct;
        confidences(m, ds, conf, correct);
        ReliabilityTable table = ece(conf, correct);

        json j;
        j["dataset"] = generator_name(r.dspec.generator);
        j["n"] = ds.size();
        j["accuracy"] = accuracy(m, ds);
        j["ece"] = table.ece;
        json buckets = json::array();
        std::ostringstream rel;
        rel.precision(17);
        for (std::size_t b = 0; b < table.buckets.size(); ++b) {
            const auto& bk = table.buckets[b];
            buckets.push_back(json{{"count", bk.count},
                                   {"mean_confidence", bk.mean_confidence},
                                   {"mean_accuracy", bk.mean_accuracy}});
            if (bk.count)
                rel << bk.mean_confidence << " " << bk.mean_accuracy << "\n";
        }
        j["reliability"] = buckets;
        write_text(out / "eval.json", j.dump(2) + "\n");
        write_text(out / "reliability.txt", rel.str());
        return 0;
    });
}

namespace {

LabeledDataset make_ood_set(const std::string& name, const LabeledDataset& in_ds,
                            std::size_t n, std::uint64_t seed) {
    const std::size_t d = in_ds.dim();
    LabeledDataset ood;
    ood.name = name;
    ood.num_classes = in_ds.num_classes;
    ood.inputs = Tensor({n, d});
    ood.labels.assign(n, 0);
    Rng rng = Rng::derive(seed, fnv1a(name));
    if (name == "constant") {
        // every row identical, mid-box
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) ood.inputs.at(i, j) = 0.5;
    } else if (name == "uniform") {
        for (auto& v : ood.inputs.data) v = rng.uniform(-1.0, 1.0);
    } else if (name == "far_cluster") {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                ood.inputs.at(i, j) = 2.5 + 0.1 * rng.gaussian();
    } else {
        auto dot = name.rfind('.');
        std::string fmt = dot == std::string::npos ? "csv" : name.substr(dot + 1);
        return load_file(name, fmt);
    }
    return ood;
}

}  // namespace

int cmd_ood(const CommandOpts& opts, const std::string& checkpoint) {
    return guarded([&]() -> int {
        Run r = load_run(opts);
        fs::create_directories(opts.out_dir);
        fs::path out(opts.out_dir);

        auto set_names = r.cfg.get_str_list(
            "ood.sets", {"far_cluster", "uniform", "constant"});
        auto scores =
            r.cfg.get_str_list("ood.scores", {"logp", "maxprob", "approx_mass"});
        std::size_t n_ood = std::size_t(r.cfg.get_int("ood.n", 500));
        echo_config(r, out);

        JemModel m = load_model(checkpoint);
        LabeledDataset full = build_dataset(r);
        SplitDataset parts = split(full, r.val_fraction, r.seed);
        const LabeledDataset& in_ds = parts.val.size() ? parts.val : parts.train;

        std::vector<LabeledDataset> ood_sets;
        for (const auto& name : set_names)
            ood_sets.push_back(make_ood_set(name, in_ds, n_ood, r.seed));

        auto reports = ood_report(m, in_ds, ood_sets, scores);
        json j = json::array();
        for (const auto& rep : reports) {
            json jr;
            jr["score"] = rep.score_name;
            json per = json::array();
            for (std::size_t i = 0; i < rep.ood_names.size(); ++i)
                per.push_back(json{{"ood_set", rep.ood_names[i]},
                                   {"auroc", rep.aurocs[i]}});
            jr["results"] = per;
            j.push_back(jr);
            // histogram text: bin_center count_in count_ood...
            std::ostringstream hs;
            hs.precision(17);
            for (std::size_t b = 0; b + 1 < rep.bin_edges.size(); ++b) {
                hs << 0.5 * (rep.bin_edges[b] + rep.bin_edges[b + 1]);
                for (const auto& h : rep.histograms) hs << " " << h[b];
                hs << "\n";
            }
            write_text(out / ("hist_" + rep.score_name + ".txt"), hs.str());
        }
        write_text(out / "ood.json", j.dump(2) + "\n");
        return 0;
    });
}

int cmd_attack(const CommandOpts& opts, const std::string& checkpoint) {
    return guarded([&]() -> int {
        Run r = load_run(opts);
        fs::create_directories(opts.out_dir);
        fs::path out(opts.out_dir);

        AttackConfig ac;
        ac.norm = norm_from_name(r.cfg.get_str("attack.norm"));
        ac.pgd_iters = r.cfg.get_int("attack.pgd_iters", 40);
        ac.restarts = r.cfg.get_int("attack.restarts", 20);
        ac.eot_samples = r.cfg.get_int("attack.eot_samples", 5);
        ac.refine_steps = r.cfg.get_int("attack.refine_steps", 0);
        ac.bsearch_iters = r.cfg.get_int("attack.bsearch_iters", 12);
        ac.eps_max = r.cfg.get_double("attack.eps_max", 0.0);
        ac.step_factor = r.cfg.get_double("attack.step_factor", 2.5);
        ac.sampler = sampler_config(r, false);
        std::size_t n_inputs = std::size_t(r.cfg.get_int("attack.n_inputs", 300));
        bool run_pointwise = r.cfg.get_bool("attack.pointwise", false);
        std::size_t pointwise_inputs =
            std::size_t(r.cfg.get_int("attack.pointwise_inputs", 50));
        std::vector<int> transfer_ks;
        if (r.cfg.has("attack.transfer_ks"))
            transfer_ks = r.cfg.get_int_list("attack.transfer_ks");
        echo_config(r, out);

        JemModel m = load_model(checkpoint);
        LabeledDataset full = build_dataset(r);
        SplitDataset parts = split(full, r.val_fraction, r.seed);
        const LabeledDataset& ds = parts.val.size() ? parts.val : parts.train;

        std::vector<Tensor> advs;
        std::vector<double> eps =
            attack_dataset(m, ds, ac, r.seed, n_inputs, &advs);
        RobustnessCurve curve = robustness_curve(eps);

        std::ostringstream cs;
        cs.precision(17);
        for (auto [e, a] : curve.points) cs << e << " " << a << "\n";
        write_text(out / ("curve_" + norm_name(ac.norm) + "_k" +
                          std::to_string(ac.refine_steps) + ".txt"),
                   cs.str());

        // export successful adversarials (finite nonzero eps) for transfer
        LabeledDataset adv_set;
        adv_set.name = "adversarials";
        adv_set.num_classes = int(m.num_classes);
        std::vector<std::size_t> perm(ds.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        Rng pick = Rng::derive(r.seed, 0xA77A);
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[pick.below(i)]);
        std::vector<std::vector<double>> adv_rows;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (!std::isfinite(eps[i]) || eps[i] == 0.0) continue;
            adv_rows.push_back(advs[i].data);
            adv_set.labels.push_back(ds.labels[perm[i]]);
        }
        adv_set.inputs = Tensor({adv_rows.size(), ds.dim()});
        for (std::size_t i = 0; i < adv_rows.size(); ++i)
            for (std::size_t j = 0; j < ds.dim(); ++j)
                adv_set.inputs.at(i, j) = adv_rows[i][j];
        if (adv_set.size())
            save_jtb(adv_set, (out / "adv_examples.jtb").string());

        json j;
        j["norm"] = norm_name(ac.norm);
        j["refine_steps"] = ac.refine_steps;
        j["n_attacked"] = eps.size();
        j["min_eps"] = eps;
        {
            std::vector<double> finite;
            for (double e : eps)
                if (std::isfinite(e)) finite.push_back(e);
            std::sort(finite.begin(), finite.end());
            j["n_failed"] = eps.size() - finite.size();
            std::vector<double> med = eps;  // inf sorts last; median over all
            std::sort(med.begin(), med.end());
            j["median_eps"] = med.empty() ? 0.0 : med[med.size() / 2];
        }

        if (run_pointwise) {
            std::size_t np = std::min(pointwise_inputs, eps.size());
            std::vector<double> pw(np);
#pragma omp parallel for schedule(dynamic)
            for (long long i = 0; i < (long long)np; ++i) {
                Rng rr = Rng::derive(r.seed, 0xB0B, i);
                Tensor row = ds.inputs.row(perm[i]);
                pw[i] = pointwise_attack(m, row, ds.labels[perm[i]], ac, rr);
            }
            j["pointwise_eps"] = pw;
            std::size_t ge = 0, comparable = 0;
            for (std::size_t i = 0; i < np; ++i) {
                if (!std::isfinite(eps[i])) continue;
                ++comparable;
                if (pw[i] >= eps[i] - 1e-12) ++ge;
            }
            j["pointwise_ge_pgd_fraction"] =
                comparable ? double(ge) / double(comparable) : 1.0;
        }

        if (!transfer_ks.empty() && adv_set.size()) {
            json tj = json::array();
            for (int k : transfer_ks) {
                Rng rr = Rng::derive(r.seed, 0x7AEA, std::uint64_t(k));
                tj.push_back(json{{"k", k},
                                  {"accuracy", transfer_eval(m, adv_set, k, ac, rr)}});
            }
            j["transfer"] = tj;
        }

        write_text(out / "attack.json", j.dump(2) + "\n");
        return 0;
    });
}

int cmd_distal(const CommandOpts& opts, const std::string& checkpoint,
               int target_class) {
    return guarded([&]() -> int {
        Run r = load_run(opts);
        fs::create_directories(opts.out_dir);
        fs::path out(opts.out_dir);
        int n = r.cfg.get_int("distal.n", 10);
        double conf_target = r.cfg.get_double("distal.conf_target", 0.9);
        int max_iters = r.cfg.get_int("distal.max_iters", 1000);
        double step_size = r.cfg.get_double("distal.step_size", 0.05);
        echo_config(r, out);

        JemModel m = load_model(checkpoint);
        if (target_class < 0 || std::size_t(target_class) >= m.num_classes)
            throw ConfigError("distal: target class out of range");

        json j = json::array();
        std::size_t reached = 0;
        for (int i = 0; i < n; ++i) {
            Rng rng = Rng::derive(r.seed, 0xD157, i);
            DistalResult res =
                distal_generate(m, target_class, conf_target, max_iters, rng,
                                step_size);
            reached += res.reached;
            j.push_back(json{{"final_confidence", res.confidence},
                             {"reached_target", res.reached},
                             {"iterations", res.trajectory.size()},
                             {"final_input", res.x.data},
                             {"trajectory", res.trajectory}});
        }
        json top;
        top["target_class"] = target_class;
        top["conf_target"] = conf_target;
        top["fraction_reached"] = double(reached) / double(n);
        top["runs"] = j;
        write_text(out / "distal.json", top.dump(2) + "\n");
        return 0;
    });
}

}  // namespace jem
