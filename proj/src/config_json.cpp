#include "janus/config_json.hpp"

#include <set>

namespace janus {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!j.is_object()) throw ParseError(ctx + ": expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ParseError(ctx + ": unknown key \"" + key + "\"");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json janus_config_to_json(const JanusConfig& c) {
    return json{
        {"image_size", c.image_size},
        {"channels", c.channels},
        {"latent_dim", c.latent_dim},
        {"encoder_channels", c.encoder_channels},
        {"decoder_channels", c.decoder_channels},
        {"khronos",
         {{"latent_dim", c.khronos.latent_dim},
          {"rank", c.khronos.rank},
          {"basis_count", c.khronos.basis_count},
          {"output_dim", c.khronos.output_dim},
          {"degree", c.khronos.degree}}},
        {"task", c.task == TaskKind::Classification ? "classification" : "regression"},
        {"target_scale", c.target_scale},
    };
}

JanusConfig janus_config_from_json(const json& j, JanusConfig c) {
    check_keys(j,
               {"image_size", "channels", "latent_dim", "encoder_channels", "decoder_channels",
                "khronos", "task", "target_scale"},
               "model config");
    maybe(j, "image_size", c.image_size);
    maybe(j, "channels", c.channels);
    if (j.contains("latent_dim")) {
        c.latent_dim = j.at("latent_dim").get<int>();
        c.khronos.latent_dim = c.latent_dim;
    }
    maybe(j, "encoder_channels", c.encoder_channels);
    maybe(j, "decoder_channels", c.decoder_channels);
    if (j.contains("khronos")) {
        const json& k = j.at("khronos");
        check_keys(k, {"latent_dim", "rank", "basis_count", "output_dim", "degree"},
                   "model config khronos");
        maybe(k, "latent_dim", c.khronos.latent_dim);
        maybe(k, "rank", c.khronos.rank);
        maybe(k, "basis_count", c.khronos.basis_count);
        maybe(k, "output_dim", c.khronos.output_dim);
        maybe(k, "degree", c.khronos.degree);
    }
    if (j.contains("task")) {
        const std::string t = j.at("task").get<std::string>();
        if (t == "classification")
            c.task = TaskKind::Classification;
        else if (t == "regression")
            c.task = TaskKind::Regression;
        else
            throw ParseError("model config: task must be \"classification\" or \"regression\", "
                             "got \"" + t + "\"");
    }
    maybe(j, "target_scale", c.target_scale);
    return c;
}

json train_config_to_json(const TrainConfig& c) {
    return json{
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"lambda_recon", c.weights.recon},
        {"lambda_cycle", c.weights.cycle},
        {"lambda_deep", c.weights.deep},
        {"seed", c.seed},
        {"target_scale", c.target_scale},
        {"eval_every", c.eval_every},
        {"val_fraction", c.val_fraction},
    };
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    check_keys(j,
               {"epochs", "batch_size", "learning_rate", "lambda_recon", "lambda_cycle",
                "lambda_deep", "seed", "target_scale", "eval_every", "val_fraction"},
               "train config");
    maybe(j, "epochs", c.epochs);
    maybe(j, "batch_size", c.batch_size);
    maybe(j, "learning_rate", c.learning_rate);
    maybe(j, "lambda_recon", c.weights.recon);
    maybe(j, "lambda_cycle", c.weights.cycle);
    maybe(j, "lambda_deep", c.weights.deep);
    maybe(j, "seed", c.seed);
    maybe(j, "target_scale", c.target_scale);
    maybe(j, "eval_every", c.eval_every);
    maybe(j, "val_fraction", c.val_fraction);
    return c;
}

json inversion_config_to_json(const InversionConfig& c) {
    return json{
        {"target", c.target},
        {"swarm_size", c.swarm_size},
        {"steps", c.steps},
        {"learning_rate", c.learning_rate},
        {"lambda_align", c.weights.align},
        {"lambda_cycle", c.weights.cycle},
        {"lambda_deep", c.weights.deep},
        {"seed", c.seed},
        {"conditional_prior", c.conditional_prior},
    };
}

InversionConfig inversion_config_from_json(const json& j, InversionConfig c) {
    check_keys(j,
               {"target", "swarm_size", "steps", "learning_rate", "lambda_align", "lambda_cycle",
                "lambda_deep", "seed", "conditional_prior"},
               "inversion config");
    maybe(j, "target", c.target);
    maybe(j, "swarm_size", c.swarm_size);
    maybe(j, "steps", c.steps);
    maybe(j, "learning_rate", c.learning_rate);
    maybe(j, "lambda_align", c.weights.align);
    maybe(j, "lambda_cycle", c.weights.cycle);
    maybe(j, "lambda_deep", c.weights.deep);
    maybe(j, "seed", c.seed);
    maybe(j, "conditional_prior", c.conditional_prior);
    return c;
}

json microgen_params_to_json(const MicroGenParams& p) {
    return json{
        {"grid", p.grid},
        {"corr_len_min", p.corr_len_min},
        {"corr_len_max", p.corr_len_max},
        {"phi_min", p.phi_min},
        {"phi_max", p.phi_max},
        {"k1", p.k1},
        {"k2", p.k2},
        {"cg_tol", p.cg_tol},
    };
}

MicroGenParams microgen_params_from_json(const json& j, MicroGenParams p) {
    check_keys(j,
               {"grid", "corr_len_min", "corr_len_max", "phi_min", "phi_max", "k1", "k2", "cg_tol"},
               "microgen config");
    maybe(j, "grid", p.grid);
    maybe(j, "corr_len_min", p.corr_len_min);
    maybe(j, "corr_len_max", p.corr_len_max);
    maybe(j, "phi_min", p.phi_min);
    maybe(j, "phi_max", p.phi_max);
    maybe(j, "k1", p.k1);
    maybe(j, "k2", p.k2);
    maybe(j, "cg_tol", p.cg_tol);
    return p;
}

}  // namespace janus
