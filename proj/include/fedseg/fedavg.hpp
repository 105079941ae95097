#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedseg/mask.hpp"
#include "fedseg/model_params.hpp"
#include "fedseg/tensor.hpp"
#include "fedseg/unet.hpp"

namespace fedseg {

// One training example in the coordinate space the models run in.
struct TrainSample {
    Tensor frame; // 1xHxW
    BinaryMask eem;
    BinaryMask lumen;
};
using ClientDataset = std::vector<TrainSample>;

enum class OptimizerKind { Adam, Sgd };

struct FedConfig {
    int n_clients = 3;
    int rounds = 10;
    int local_epochs = 1;
    int batch_size = 4;
    double learning_rate = 1.00e-5;
    double l2_lambda = 1e-4;
    double loss_omega = 0.5;
    uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Adam;

    void validate() const;
};

struct RoundLog {
    int round = 0;
    std::vector<int64_t> client_samples;
    std::vector<double> client_loss; // mean hybrid loss over the local pass
    bool has_eval = false;
    double eval_eem_dsc = 0, eval_lumen_dsc = 0, eval_plaque_dsc = 0;
};

// The parallel model pair: independent EEM and lumen weight spaces, averaged
// as two separate FedAvg streams.
struct GlobalPair {
    ModelParams eem;
    ModelParams lumen;
};

// Seeded initialization of both streams (seeds derived from config.seed).
GlobalPair init_global_pair(const UNetConfig& unet, const FedConfig& cfg);

// Weighted aggregation: coordinate-wise sum of (D_j / D) * w_j over clients,
// accumulated in double and rounded back to 32-bit.
ModelParams aggregate(const std::vector<ModelParams>& client_params,
                      const std::vector<int64_t>& sample_counts);

struct ClientUpdateResult {
    ModelParams eem;
    ModelParams lumen;
    int64_t sample_count = 0;
    double mean_loss = 0.0;
};

// Local pass: load the global pair, shuffle with a seed derived from
// (config.seed, client_id, round, epoch), run E epochs of optimizer steps on
// hybrid-loss gradients over batches of size B (final partial batch
// included).
ClientUpdateResult client_update(int client_id, int round, const GlobalPair& global,
                                 const ClientDataset& data, const UNetConfig& unet,
                                 const FedConfig& cfg);

// per-round evaluation hook: returns (eem, lumen, plaque) DSC
using EvalCallback = std::function<std::array<double, 3>(const GlobalPair&)>;

struct TrainResult {
    GlobalPair global;
    std::vector<RoundLog> rounds;
};

// Synchronous full-participation rounds: broadcast, collect all N updates,
// aggregate, repeat. Clients may run on threads; aggregation order is fixed
// by client index so results do not depend on scheduling.
TrainResult server_run(const std::vector<ClientDataset>& client_data, const UNetConfig& unet,
                       const FedConfig& cfg, const EvalCallback& eval = nullptr,
                       bool parallel_clients = true);

// Centralized baseline: the identical local pass over the full dataset with
// no aggregation step. Bit-compatible with a single-client federated run.
TrainResult centralized_run(const ClientDataset& data, const UNetConfig& unet,
                            const FedConfig& cfg, const EvalCallback& eval = nullptr);

// Combined layout ("eem."/"lumen." name prefixes) used on the wire and on disk.
ModelParams combine_pair(const GlobalPair& pair);
GlobalPair split_pair(const ModelParams& combined);

} // namespace fedseg
