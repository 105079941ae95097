#include "fedseg/fedavg.hpp"

#include "fedseg/loss.hpp"
#include "fedseg/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace fedseg {

void FedConfig::validate() const {
    if (n_clients < 1 || rounds < 0 || local_epochs < 1 || batch_size < 1)
        throw std::invalid_argument("fed config: counts must be positive");
    if (learning_rate < 0 || l2_lambda < 0)
        throw std::invalid_argument("fed config: rates must be non-negative");
    if (loss_omega < 0.0 || loss_omega > 1.0)
        throw std::invalid_argument("fed config: loss omega must be in [0,1]");
}

GlobalPair init_global_pair(const UNetConfig& unet, const FedConfig& cfg) {
    UNetConfig eem_cfg = unet;
    eem_cfg.seed = derive_seed(cfg.seed, 0xEE11);
    UNetConfig lumen_cfg = unet;
    lumen_cfg.seed = derive_seed(cfg.seed, 0x1111EE);
    AdamHyper hyper;
    hyper.learning_rate = cfg.learning_rate;
    hyper.l2_lambda = cfg.l2_lambda;
    return {build_model(eem_cfg, hyper).params, build_model(lumen_cfg, hyper).params};
}

ModelParams aggregate(const std::vector<ModelParams>& client_params,
                      const std::vector<int64_t>& sample_counts) {
    if (client_params.empty() || client_params.size() != sample_counts.size())
        throw std::invalid_argument("aggregate: need one sample count per client");
    int64_t total = 0;
    for (int64_t c : sample_counts) {
        if (c <= 0) throw std::invalid_argument("aggregate: sample counts must be positive");
        total += c;
    }
    const ModelParams& first = client_params.front();
    for (const ModelParams& p : client_params)
        if (!p.layout_matches(first)) throw std::invalid_argument("aggregate: layout mismatch");

    std::vector<double> weights(sample_counts.size());
    for (size_t j = 0; j < sample_counts.size(); ++j)
        weights[j] = static_cast<double>(sample_counts[j]) / static_cast<double>(total);

    ModelParams out = first.zeros_like();
    for (size_t t = 0; t < out.size(); ++t) {
        auto& dst = out.tensor(t).data;
        for (size_t k = 0; k < dst.size(); ++k) {
            double acc = 0.0;
            for (size_t j = 0; j < client_params.size(); ++j)
                acc += weights[j] * static_cast<double>(client_params[j].tensor(t).data[k]);
            dst[k] = static_cast<float>(acc);
        }
    }
    return out;
}

namespace {

// One optimizer step for one model stream on one batch.
double train_batch(const UNetConfig& unet, const FedConfig& cfg, ModelParams& params,
                   AdamState& adam, const ClientDataset& data, const std::vector<int>& idx,
                   size_t start, size_t count, bool lumen_stream) {
    const int h = unet.in_h, w = unet.in_w;
    Tensor batch({static_cast<int>(count), 1, h, w});
    for (size_t s = 0; s < count; ++s) {
        const TrainSample& smp = data[idx[start + s]];
        std::copy(smp.frame.data.begin(), smp.frame.data.end(),
                  batch.data.begin() + static_cast<size_t>(s) * h * w);
    }
    auto [probs, cache] = unet_forward(unet, params, batch);

    Tensor loss_grad({static_cast<int>(count), 1, h, w});
    double loss_sum = 0.0;
    for (size_t s = 0; s < count; ++s) {
        const TrainSample& smp = data[idx[start + s]];
        Tensor pred({h, w});
        std::copy(probs.data.begin() + static_cast<size_t>(s) * h * w,
                  probs.data.begin() + static_cast<size_t>(s + 1) * h * w, pred.data.begin());
        const BinaryMask& target = lumen_stream ? smp.lumen : smp.eem;
        LossResult lr = hybrid_loss(pred, target, cfg.loss_omega);
        loss_sum += lr.value;
        // batch loss = mean over samples, so each sample grad is scaled by 1/count
        const float scale = 1.0f / static_cast<float>(count);
        for (size_t k = 0; k < lr.grad.data.size(); ++k)
            loss_grad.data[static_cast<size_t>(s) * h * w + k] = lr.grad.data[k] * scale;
    }

    ModelParams grads = unet_backward(unet, params, cache, loss_grad);
    if (cfg.optimizer == OptimizerKind::Adam)
        adam_step(params, grads, adam);
    else
        sgd_step(params, grads, cfg.learning_rate, cfg.l2_lambda);
    return loss_sum / static_cast<double>(count);
}

} // namespace

ClientUpdateResult client_update(int client_id, int round, const GlobalPair& global,
                                 const ClientDataset& data, const UNetConfig& unet,
                                 const FedConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("client_update: empty dataset");

    ClientUpdateResult res;
    res.eem = global.eem;
    res.lumen = global.lumen;
    res.sample_count = static_cast<int64_t>(data.size());

    AdamHyper hyper;
    hyper.learning_rate = cfg.learning_rate;
    hyper.l2_lambda = cfg.l2_lambda;
    AdamState adam_eem = make_adam_state(res.eem, hyper);
    AdamState adam_lumen = make_adam_state(res.lumen, hyper);

    std::vector<int> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);

    double loss_acc = 0.0;
    int64_t batches = 0;
    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, static_cast<uint64_t>(client_id) + 1,
                            static_cast<uint64_t>(round), static_cast<uint64_t>(epoch)));
        rng.shuffle(idx);
        for (size_t start = 0; start < idx.size(); start += cfg.batch_size) {
            const size_t count = std::min(static_cast<size_t>(cfg.batch_size), idx.size() - start);
            const double le =
                train_batch(unet, cfg, res.eem, adam_eem, data, idx, start, count, false);
            const double ll =
                train_batch(unet, cfg, res.lumen, adam_lumen, data, idx, start, count, true);
            loss_acc += 0.5 * (le + ll);
            ++batches;
        }
    }
    res.mean_loss = batches ? loss_acc / static_cast<double>(batches) : 0.0;
    return res;
}

TrainResult server_run(const std::vector<ClientDataset>& client_data, const UNetConfig& unet,
                       const FedConfig& cfg, const EvalCallback& eval, bool parallel_clients) {
    cfg.validate();
    const int n = static_cast<int>(client_data.size());
    if (n != cfg.n_clients)
        throw std::invalid_argument("server_run: partition size does not match n_clients");
    for (const ClientDataset& d : client_data)
        if (d.empty()) throw std::invalid_argument("server_run: empty client dataset");

    TrainResult result;
    result.global = init_global_pair(unet, cfg);

    for (int round = 1; round <= cfg.rounds; ++round) {
        std::vector<ClientUpdateResult> updates(n);
        if (parallel_clients && n > 1) {
            std::vector<std::thread> threads;
            std::vector<std::exception_ptr> errors(n);
            for (int j = 0; j < n; ++j)
                threads.emplace_back([&, j] {
                    try {
                        updates[j] = client_update(j, round, result.global, client_data[j], unet, cfg);
                    } catch (...) {
                        errors[j] = std::current_exception();
                    }
                });
            for (auto& t : threads) t.join();
            for (auto& e : errors)
                if (e) std::rethrow_exception(e);
        } else {
            for (int j = 0; j < n; ++j)
                updates[j] = client_update(j, round, result.global, client_data[j], unet, cfg);
        }

        std::vector<ModelParams> eem_list, lumen_list;
        std::vector<int64_t> counts;
        RoundLog log;
        log.round = round;
        for (int j = 0; j < n; ++j) {
            eem_list.push_back(std::move(updates[j].eem));
            lumen_list.push_back(std::move(updates[j].lumen));
            counts.push_back(updates[j].sample_count);
            log.client_samples.push_back(updates[j].sample_count);
            log.client_loss.push_back(updates[j].mean_loss);
        }
        result.global.eem = aggregate(eem_list, counts);
        result.global.lumen = aggregate(lumen_list, counts);

        if (eval) {
            const auto d = eval(result.global);
            log.has_eval = true;
            log.eval_eem_dsc = d[0];
            log.eval_lumen_dsc = d[1];
            log.eval_plaque_dsc = d[2];
        }
        result.rounds.push_back(std::move(log));
    }
    return result;
}

TrainResult centralized_run(const ClientDataset& data, const UNetConfig& unet,
                            const FedConfig& cfg, const EvalCallback& eval) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("centralized_run: empty dataset");

    TrainResult result;
    result.global = init_global_pair(unet, cfg);
    for (int round = 1; round <= cfg.rounds; ++round) {
        ClientUpdateResult up = client_update(0, round, result.global, data, unet, cfg);
        result.global.eem = std::move(up.eem);
        result.global.lumen = std::move(up.lumen);
        RoundLog log;
        log.round = round;
        log.client_samples.push_back(up.sample_count);
        log.client_loss.push_back(up.mean_loss);
        if (eval) {
            const auto d = eval(result.global);
            log.has_eval = true;
            log.eval_eem_dsc = d[0];
            log.eval_lumen_dsc = d[1];
            log.eval_plaque_dsc = d[2];
        }
        result.rounds.push_back(std::move(log));
    }
    return result;
}

ModelParams combine_pair(const GlobalPair& pair) {
    ModelParams out;
    for (const auto& [name, t] : pair.eem.items) out.add("eem." + name, t);
    for (const auto& [name, t] : pair.lumen.items) out.add("lumen." + name, t);
    return out;
}

GlobalPair split_pair(const ModelParams& combined) {
    GlobalPair pair;
    for (const auto& [name, t] : combined.items) {
        if (name.starts_with("eem."))
            pair.eem.add(name.substr(4), t);
        else if (name.starts_with("lumen."))
            pair.lumen.add(name.substr(6), t);
        else
            throw std::invalid_argument("split_pair: unexpected tensor name " + name);
    }
    if (pair.eem.empty() || pair.lumen.empty())
        throw std::invalid_argument("split_pair: missing a model stream");
    return pair;
}

} // namespace fedseg
