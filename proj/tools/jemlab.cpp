// jemlab: train and probe a classifier that doubles as an energy-based
// density model. Subcommands: train, sample, eval, ood, attack, distal.

#include <CLI11.hpp>

#include "jem/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"joint energy-based model laboratory"};
    app.require_subcommand(1);

    jem::CommandOpts opts;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string checkpoint;
    int method = 0, n = 0, steps = -1, target = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_ckpt) {
        cmd->add_option("--config", opts.config_path, "run configuration file")
            ->required();
        cmd->add_option("--out", opts.out_dir, "output directory")->required();
        cmd->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--threads", opts.threads, "worker thread count");
        if (needs_ckpt)
            cmd->add_option("--checkpoint", checkpoint, "JEMC checkpoint path")
                ->required();
    };

    auto* train = app.add_subcommand("train", "run the training loop");
    add_common(train, false);
    train->add_flag("--resume", opts.resume, "resume from ckpt_last.jemc in --out");

    auto* sample = app.add_subcommand("sample", "draw model samples");
    add_common(sample, true);
    sample->add_option("--method", method, "1 = class-conditional, 2 = marginal");
    sample->add_option("--n", n, "number of samples");
    sample->add_option("--steps", steps, "SGLD steps per sample");

    auto* eval = app.add_subcommand("eval", "accuracy and calibration");
    add_common(eval, true);

    auto* ood = app.add_subcommand("ood", "out-of-distribution score report");
    add_common(ood, true);

    auto* attack = app.add_subcommand("attack", "robustness curves");
    add_common(attack, true);

    auto* distal = app.add_subcommand("distal", "high-confidence inputs from noise");
    add_common(distal, true);
    distal->add_option("--target", target, "target class")->required();

    CLI11_PARSE(app, argc, argv);
    if (seed_set) opts.seed = seed;

    if (train->parsed()) return jem::cmd_train(opts);
    if (sample->parsed()) return jem::cmd_sample(opts, checkpoint, method, n, steps);
    if (eval->parsed()) return jem::cmd_eval(opts, checkpoint);
    if (ood->parsed()) return jem::cmd_ood(opts, checkpoint);
    if (attack->parsed()) return jem::cmd_attack(opts, checkpoint);
    if (distal->parsed()) return jem::cmd_distal(opts, checkpoint, target);
    return 1;
}
