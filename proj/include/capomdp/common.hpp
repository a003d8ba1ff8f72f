#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace capomdp {

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

struct ModelFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ZeroProbabilityObservation : std::runtime_error {
    ZeroProbabilityObservation(int action, int observation)
        : std::runtime_error("observation " + std::to_string(observation) +
                             " has zero probability under action " + std::to_string(action)),
          action(action), observation(observation) {}
    int action;
    int observation;
};

struct SingularSystem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SystemTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CandidateExplosion : std::runtime_error {
    CandidateExplosion(std::size_t count, std::size_t cap)
        : std::runtime_error("dp backup would generate " + std::to_string(count) +
                             " candidates, cap is " + std::to_string(cap)),
          count(count), cap(cap) {}
    std::size_t count;
    std::size_t cap;
};

struct LpInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoFeasiblePair : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidDistribution : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NegativeMeasurement : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownContext : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidComponentTable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CoincidentPositions : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateMean : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoTransitionFound : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ControllerDesync : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SeedMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Seeded randomness
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent seed streams from one base
// seed so parallel workers stay reproducible regardless of scheduling.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix_seed(base ^ mix_seed(stream + 0x51ed270b7a3fca42ULL));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_a, std::uint64_t stream_b) {
    return derive_seed(derive_seed(base, stream_a), stream_b);
}

}  // namespace capomdp
