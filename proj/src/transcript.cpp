#include "leakprobe/transcript.hpp"

#include <chrono>
#include <ctime>

#include "leakprobe/util.hpp"

namespace fs = std::filesystem;

namespace leakprobe {

std::string iso8601_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json transcript_to_json(const TranscriptRecord& rec) {
    return {
        {"trial_id", rec.trial_id},
        {"conversation", conversation_to_json(rec.conversation)},
        {"params",
         {{"n", rec.params.n},
          {"temperature", rec.params.temperature},
          {"max_tokens", rec.params.max_tokens},
          {"timeout_s", rec.params.timeout_s},
          {"model_id", rec.params.model_id}}},
        {"responses", rec.responses},
        {"timestamp", rec.timestamp},
        {"backend_id", rec.backend_id},
        {"fingerprint", rec.fingerprint},
    };
}

TranscriptRecord transcript_from_json(const nlohmann::json& j) {
    TranscriptRecord rec;
    rec.trial_id = j.at("trial_id").get<std::string>();
    rec.conversation = conversation_from_json(j.at("conversation"));
    const auto& p = j.at("params");
    rec.params.n = p.at("n").get<int>();
    rec.params.temperature = p.at("temperature").get<double>();
    rec.params.max_tokens = p.value("max_tokens", 512);
    rec.params.timeout_s = p.value("timeout_s", 30.0);
    rec.params.model_id = p.value("model_id", "default");
    for (const auto& r : j.at("responses")) rec.responses.push_back(r.get<std::string>());
    rec.timestamp = j.value("timestamp", "");
    rec.backend_id = j.value("backend_id", "");
    rec.fingerprint = j.value("fingerprint", "");
    return rec;
}

TranscriptWriter::TranscriptWriter(const fs::path& path, bool append) : path_(path) {
    auto mode = std::ios::binary | (append ? std::ios::app : std::ios::trunc);
    out_.open(path, mode);
    if (!out_) throw FatalError("cannot open transcript file for writing: " + path.string());
}

void TranscriptWriter::write(const TranscriptRecord& rec) {
    std::string line = transcript_to_json(rec).dump();
    std::lock_guard<std::mutex> lock(mutex_);
    out_ << line << "\n";
    out_.flush();
    if (!out_) throw FatalError("transcript write failed: " + path_.string());
}

std::vector<TranscriptRecord> read_transcripts(const fs::path& path) {
    std::vector<TranscriptRecord> records;
    std::string text = read_file(path.string());
    size_t line_no = 0;
    for (const std::string& line : split_lines(text)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        try {
            records.push_back(transcript_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw FatalError("corrupt transcript " + path.string() + " at line " +
                             std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

ReplayBackend::ReplayBackend(const fs::path& path, bool strict) : strict_(strict) {
    for (TranscriptRecord& rec : read_transcripts(path)) {
        std::string key = conversation_fingerprint(rec.conversation, rec.params);
        by_fingerprint_[key].push_back(std::move(rec.responses));
    }
}

std::vector<std::string> ReplayBackend::complete(const Conversation& conversation,
                                                 const GenerationParams& params) {
    std::string key = conversation_fingerprint(conversation, params);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = by_fingerprint_.find(key);
    if (it == by_fingerprint_.end() || it->second.empty()) {
        std::string msg = "replay miss: no recorded responses for conversation " + key;
        if (strict_) throw FatalBackendError(msg);
        throw BackendError(msg);
    }
    // The final recorded response set stays available so replays can serve
    // more trials than were recorded for an identical conversation.
    std::vector<std::string> responses = it->second.front();
    if (it->second.size() > 1) it->second.pop_front();
    return responses;
}

std::unique_ptr<Backend> open_replay(const fs::path& path, bool strict) {
    return std::make_unique<ReplayBackend>(path, strict);
}

}  // namespace leakprobe
