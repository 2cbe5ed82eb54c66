#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace vulnmgr::llm {

enum class Role { System, User, Assistant, Tool };

const char* to_string(Role r);

struct ToolInvocation {
    std::string id;
    std::string tool_name;
    std::map<std::string, std::string> arguments;
};

struct ChatMessage {
    Role role = Role::User;
    std::string content;
    std::optional<ToolInvocation> tool_call;       // assistant messages only
    std::optional<std::string> tool_result_for;    // tool messages only

    static ChatMessage system(std::string text);
    static ChatMessage user(std::string text);
    static ChatMessage assistant(std::string text);
    static ChatMessage assistant_tool(ToolInvocation inv);
    static ChatMessage tool_result(std::string invocation_id, std::string text);
};

struct ProviderConfig {
    enum class Kind { Live, Scripted };
    Kind kind = Kind::Scripted;
    std::string model_id = "offline-scripted";
    double temperature = 0.0;  // pinned; the wire layer refuses anything else
    int max_tool_rounds = 12;
    int request_timeout_s = 120;

    // live-provider settings
    std::string endpoint;  // e.g. https://host/v1/chat/completions
    std::string api_key_env = "VULN_LLM_API_KEY";
    int retry_attempts = 3;
    int retry_backoff_ms = 500;
};

struct ToolParam {
    std::string name;
    std::string description;
};

struct ToolSchema {
    std::string name;
    std::string description;
    std::vector<ToolParam> parameters;  // all string-valued
};

struct Transcript {
    std::vector<ChatMessage> messages;
    int tool_round_count = 0;
    std::string terminal_text;
    bool truncated = false;
};

class Provider {
public:
    virtual ~Provider() = default;
    // `session` scopes scripted playback; live providers ignore it.
    virtual ChatMessage complete(const ProviderConfig& config, const std::string& session,
                                 const std::vector<ChatMessage>& messages,
                                 const std::vector<ToolSchema>& tools) = 0;
};

class Toolbox {
public:
    using Handler = std::function<std::string(const std::map<std::string, std::string>&)>;

    void add(ToolSchema schema, Handler handler);
    bool has(const std::string& name) const;
    const std::vector<ToolSchema>& schemas() const { return schemas_; }
    // May throw; run_tool_loop converts exceptions into "ERROR: ..." results.
    std::string invoke(const std::string& name,
                       const std::map<std::string, std::string>& args) const;

private:
    std::vector<ToolSchema> schemas_;
    std::map<std::string, Handler> handlers_;
};

// One model call. Validates the message-shape preconditions and the
// plain-text-or-single-invocation postcondition.
ChatMessage complete(Provider& provider, const ProviderConfig& config,
                     const std::vector<ChatMessage>& messages,
                     const std::vector<ToolSchema>& tools, const std::string& session = "");

// Drives the model/tool conversation until a tool-free reply or the round cap.
// Handler failures flow back as "ERROR: ..." tool results; hitting the cap with
// a call still pending marks the transcript truncated.
Transcript run_tool_loop(Provider& provider, const ProviderConfig& config,
                         std::vector<ChatMessage> seed_messages, const Toolbox& toolbox,
                         const std::string& session = "");

// Deterministic playback of a JSON script. Two layouts:
//   [ {...step}, ... ]                          one shared sequential stream
//   { "sessions": { "label": [ {...step} ] } }  independent per-session streams
// Steps: {"text": "..."} or {"tool": "name", "args": {...}}.
class ScriptedProvider : public Provider {
public:
    static ScriptedProvider from_file(const std::filesystem::path& script_path);
    static ScriptedProvider from_json(const nlohmann::json& script);

    ChatMessage complete(const ProviderConfig& config, const std::string& session,
                         const std::vector<ChatMessage>& messages,
                         const std::vector<ToolSchema>& tools) override;

    // Test hooks: everything each session was shown, call by call.
    const std::vector<std::vector<ChatMessage>>& received(const std::string& session) const;
    int total_calls() const;

private:
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
    bool keyed_ = false;
    std::map<std::string, nlohmann::json> sessions_;
    std::map<std::string, std::size_t> cursors_;
    nlohmann::json flat_ = nlohmann::json::array();
    std::size_t flat_cursor_ = 0;
    int call_counter_ = 0;
    std::map<std::string, std::vector<std::vector<ChatMessage>>> received_;
    static const std::vector<std::vector<ChatMessage>> kNoCalls;
};

// Chat-completions wire format helpers (pure; unit-testable without sockets).
nlohmann::json build_chat_request(const ProviderConfig& config,
                                  const std::vector<ChatMessage>& messages,
                                  const std::vector<ToolSchema>& tools);
ChatMessage parse_chat_response(const nlohmann::json& body);

class LiveProvider : public Provider {
public:
    ChatMessage complete(const ProviderConfig& config, const std::string& session,
                         const std::vector<ChatMessage>& messages,
                         const std::vector<ToolSchema>& tools) override;
};

std::unique_ptr<Provider> make_provider(const ProviderConfig& config,
                                        const std::string& script_path = "");

}  // namespace vulnmgr::llm
