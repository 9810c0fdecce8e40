#pragma once

#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakprobe/backend.hpp"

namespace leakprobe {

/// One logged backend call: the full conversation, the parameters, and every
/// response, keyed for replay by conversation_fingerprint.
struct TranscriptRecord {
    std::string trial_id;
    Conversation conversation;
    GenerationParams params;
    std::vector<std::string> responses;
    std::string timestamp;   // ISO-8601 UTC
    std::string backend_id;
    std::string fingerprint; // derived; stored for auditability
};

nlohmann::json transcript_to_json(const TranscriptRecord& rec);
TranscriptRecord transcript_from_json(const nlohmann::json& j);

/// Append-only JSONL sink; one flushed line per record, serialized across
/// threads.
class TranscriptWriter {
public:
    explicit TranscriptWriter(const std::filesystem::path& path, bool append = false);

    void write(const TranscriptRecord& rec);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::mutex mutex_;
};

/// Reads a whole transcript file; a corrupt line is fatal and names the line
/// number.
std::vector<TranscriptRecord> read_transcripts(const std::filesystem::path& path);

/// Replays recorded responses keyed by conversation fingerprint. Records that
/// share a fingerprint are served in recorded order, so two-phase flows replay
/// correctly when trials run in the original order. A conversation with no
/// recorded responses is fatal in strict mode and a trial-level error
/// otherwise.
class ReplayBackend : public Backend {
public:
    ReplayBackend(const std::filesystem::path& path, bool strict);

    std::vector<std::string> complete(const Conversation& conversation,
                                      const GenerationParams& params) override;
    std::string id() const override { return "replay"; }

private:
    std::map<std::string, std::deque<std::vector<std::string>>> by_fingerprint_;
    std::mutex mutex_;
    bool strict_;
};

std::string iso8601_utc_now();

std::unique_ptr<Backend> open_replay(const std::filesystem::path& path, bool strict = true);

}  // namespace leakprobe
