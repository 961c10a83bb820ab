#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <json.hpp>

#include "posbias/endpoint.hpp"
#include "posbias/prompt.hpp"
#include "posbias/simulate.hpp"

namespace posbias {

/// Everything a model may look at for one trial.
struct TrialInput {
  const ProbeItem &variant;
  const Prompt &prompt;
  std::string trial_key;  // "<parent>#<variant key>"
  std::string item_key;   // same as trial_key except ordering sweeps, where the rank is dropped
};

struct ModelReply {
  std::string text;
  int attempts = 1;
};

/// Uniform interface over the wire client and the simulator.
class Model {
 public:
  virtual ~Model() = default;
  /// Identity that takes part in cache keys.
  [[nodiscard]] virtual std::string id() const = 0;
  [[nodiscard]] virtual nlohmann::json decoding() const = 0;
  /// Throws EndpointError on failure.
  virtual ModelReply respond(const TrialInput &input) = 0;
};

class SimulatedModel final : public Model {
 public:
  SimulatedModel(BiasProfile profile, std::uint64_t seed);

  [[nodiscard]] std::string id() const override { return id_; }
  [[nodiscard]] nlohmann::json decoding() const override { return nlohmann::json::object(); }
  ModelReply respond(const TrialInput &input) override;

  [[nodiscard]] const BiasProfile &profile() const { return profile_; }

 private:
  BiasProfile profile_;
  std::uint64_t seed_;
  std::string id_;
};

class EndpointModel final : public Model {
 public:
  explicit EndpointModel(ModelEndpoint endpoint) : client_(std::move(endpoint)) {}

  [[nodiscard]] std::string id() const override;
  [[nodiscard]] nlohmann::json decoding() const override { return client_.endpoint().decoding(); }
  ModelReply respond(const TrialInput &input) override;

 private:
  ChatClient client_;
};

}  // namespace posbias
