#pragma once

#include <stdexcept>
#include <string>

namespace fadml {

// Error taxonomy. The CLI maps these onto process exit codes, so keep the
// categories coarse: configuration, bad caller input, numeric blow-up,
// training divergence, attack-level failure, and I/O.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct training_error : std::runtime_error {
    explicit training_error(const std::string& msg, int epoch = -1)
        : std::runtime_error(msg), epoch(epoch) {}
    int epoch;
};

struct attack_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dataset ingestion problems (missing files, malformed annotation rows).
struct ingest_error : io_error {
    using io_error::io_error;
};

// Image codec problems (non-P6 magic, truncated pixel data, bad maxval).
struct codec_error : io_error {
    using io_error::io_error;
};

// Checkpoint file problems, with the failure class kept machine-readable.
struct checkpoint_error : io_error {
    enum class kind { bad_magic, bad_version, truncated, malformed };
    checkpoint_error(kind k, const std::string& msg) : io_error(msg), what_kind(k) {}
    kind what_kind;
};

}  // namespace fadml
