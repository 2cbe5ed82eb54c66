#include "vulnmgr/gateway.hpp"

#include <fstream>
#include <stdexcept>

namespace vulnmgr::llm {

const char* to_string(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::Tool: return "tool";
    }
    return "?";
}

ChatMessage ChatMessage::system(std::string text) {
    return {Role::System, std::move(text), std::nullopt, std::nullopt};
}
ChatMessage ChatMessage::user(std::string text) {
    return {Role::User, std::move(text), std::nullopt, std::nullopt};
}
ChatMessage ChatMessage::assistant(std::string text) {
    return {Role::Assistant, std::move(text), std::nullopt, std::nullopt};
}
ChatMessage ChatMessage::assistant_tool(ToolInvocation inv) {
    return {Role::Assistant, "", std::move(inv), std::nullopt};
}
ChatMessage ChatMessage::tool_result(std::string invocation_id, std::string text) {
    return {Role::Tool, std::move(text), std::nullopt, std::move(invocation_id)};
}

void Toolbox::add(ToolSchema schema, Handler handler) {
    handlers_[schema.name] = std::move(handler);
    schemas_.push_back(std::move(schema));
}

bool Toolbox::has(const std::string& name) const { return handlers_.count(name) > 0; }

std::string Toolbox::invoke(const std::string& name,
                            const std::map<std::string, std::string>& args) const {
    auto it = handlers_.find(name);
    if (it == handlers_.end()) throw std::runtime_error("unknown tool '" + name + "'");
    return it->second(args);
}

ChatMessage complete(Provider& provider, const ProviderConfig& config,
                     const std::vector<ChatMessage>& messages,
                     const std::vector<ToolSchema>& tools, const std::string& session) {
    if (messages.empty()) throw std::invalid_argument("complete: empty message list");
    if (messages.front().role != Role::System)
        throw std::invalid_argument("complete: first message must be the system prompt");
    ChatMessage reply = provider.complete(config, session, messages, tools);
    if (reply.role != Role::Assistant)
        throw std::runtime_error("provider returned a non-assistant message");
    if (reply.content.empty() && !reply.tool_call)
        throw std::runtime_error("provider returned an empty assistant message");
    return reply;
}

Transcript run_tool_loop(Provider& provider, const ProviderConfig& config,
                         std::vector<ChatMessage> seed_messages, const Toolbox& toolbox,
                         const std::string& session) {
    Transcript t;
    t.messages = std::move(seed_messages);
    while (true) {
        ChatMessage reply =
            complete(provider, config, t.messages, toolbox.schemas(), session);
        t.messages.push_back(reply);
        if (!reply.tool_call) {
            t.terminal_text = reply.content;
            break;
        }
        const ToolInvocation& inv = *reply.tool_call;
        if (t.tool_round_count >= config.max_tool_rounds) {
            t.messages.push_back(
                ChatMessage::tool_result(inv.id, "ERROR: tool round limit reached"));
            t.truncated = true;
            break;
        }
        ++t.tool_round_count;
        std::string result;
        try {
            result = toolbox.invoke(inv.tool_name, inv.arguments);
        } catch (const std::exception& e) {
            result = std::string("ERROR: ") + e.what();
        }
        t.messages.push_back(ChatMessage::tool_result(inv.id, std::move(result)));
    }
    return t;
}

const std::vector<std::vector<ChatMessage>> ScriptedProvider::kNoCalls;

ScriptedProvider ScriptedProvider::from_file(const std::filesystem::path& script_path) {
    std::ifstream in(script_path);
    if (!in) throw std::runtime_error("cannot open script: " + script_path.string());
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

ScriptedProvider ScriptedProvider::from_json(const nlohmann::json& script) {
    ScriptedProvider p;
    if (script.is_array()) {
        p.keyed_ = false;
        p.flat_ = script;
    } else if (script.is_object() && script.contains("sessions")) {
        p.keyed_ = true;
        for (auto& [label, steps] : script.at("sessions").items()) {
            if (!steps.is_array())
                throw std::runtime_error("script session '" + label + "' is not an array");
            p.sessions_[label] = steps;
        }
    } else {
        throw std::runtime_error("script must be a step array or {\"sessions\": {...}}");
    }
    return p;
}

ChatMessage ScriptedProvider::complete(const ProviderConfig&, const std::string& session,
                                       const std::vector<ChatMessage>& messages,
                                       const std::vector<ToolSchema>&) {
    std::lock_guard<std::mutex> lock(*mu_);
    received_[session].push_back(messages);

    const nlohmann::json* step = nullptr;
    if (keyed_) {
        auto it = sessions_.find(session);
        if (it == sessions_.end()) {
            std::string known;
            for (auto& [label, _] : sessions_) {
                if (!known.empty()) known += ", ";
                known += label;
            }
            throw std::runtime_error("script has no session '" + session +
                                     "' (known: " + known + ")");
        }
        std::size_t& cur = cursors_[session];
        if (cur >= it->second.size())
            throw std::runtime_error("script exhausted for session '" + session + "'");
        step = &it->second.at(cur++);
    } else {
        if (flat_cursor_ >= flat_.size()) throw std::runtime_error("script exhausted");
        step = &flat_.at(flat_cursor_++);
    }
    ++call_counter_;

    if (step->contains("text")) return ChatMessage::assistant(step->at("text").get<std::string>());
    if (step->contains("tool")) {
        ToolInvocation inv;
        inv.id = "call_" + std::to_string(call_counter_);
        inv.tool_name = step->at("tool").get<std::string>();
        if (step->contains("args")) {
            for (auto& [k, v] : step->at("args").items())
                inv.arguments[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        return ChatMessage::assistant_tool(std::move(inv));
    }
    throw std::runtime_error("script step needs \"text\" or \"tool\": " + step->dump());
}

const std::vector<std::vector<ChatMessage>>& ScriptedProvider::received(
    const std::string& session) const {
    std::lock_guard<std::mutex> lock(*mu_);
    auto it = received_.find(session);
    return it == received_.end() ? kNoCalls : it->second;
}

int ScriptedProvider::total_calls() const {
    std::lock_guard<std::mutex> lock(*mu_);
    return call_counter_;
}

nlohmann::json build_chat_request(const ProviderConfig& config,
                                  const std::vector<ChatMessage>& messages,
                                  const std::vector<ToolSchema>& tools) {
    nlohmann::json body;
    body["model"] = config.model_id;
    body["temperature"] = 0.0;  // pinned for reproducibility, not caller-controlled
    auto msgs = nlohmann::json::array();
    for (const auto& m : messages) {
        nlohmann::json jm;
        jm["role"] = to_string(m.role);
        jm["content"] = m.content;
        if (m.tool_call) {
            jm["tool_calls"] = nlohmann::json::array(
                {{{"id", m.tool_call->id},
                  {"type", "function"},
                  {"function",
                   {{"name", m.tool_call->tool_name},
                    {"arguments", nlohmann::json(m.tool_call->arguments).dump()}}}}});
        }
        if (m.tool_result_for) jm["tool_call_id"] = *m.tool_result_for;
        msgs.push_back(std::move(jm));
    }
    body["messages"] = std::move(msgs);
    if (!tools.empty()) {
        auto jt = nlohmann::json::array();
        for (const auto& t : tools) {
            nlohmann::json props = nlohmann::json::object();
            auto required = nlohmann::json::array();
            for (const auto& p : t.parameters) {
                props[p.name] = {{"type", "string"}, {"description", p.description}};
                required.push_back(p.name);
            }
            jt.push_back({{"type", "function"},
                          {"function",
                           {{"name", t.name},
                            {"description", t.description},
                            {"parameters",
                             {{"type", "object"},
                              {"properties", props},
                              {"required", required}}}}}});
        }
        body["tools"] = std::move(jt);
    }
    return body;
}

ChatMessage parse_chat_response(const nlohmann::json& body) {
    const auto& msg = body.at("choices").at(0).at("message");
    if (msg.contains("tool_calls") && !msg.at("tool_calls").empty()) {
        const auto& tc = msg.at("tool_calls").at(0);
        ToolInvocation inv;
        inv.id = tc.at("id").get<std::string>();
        inv.tool_name = tc.at("function").at("name").get<std::string>();
        auto args_raw = tc.at("function").at("arguments");
        nlohmann::json args =
            args_raw.is_string() ? nlohmann::json::parse(args_raw.get<std::string>())
                                 : args_raw;
        for (auto& [k, v] : args.items())
            inv.arguments[k] = v.is_string() ? v.get<std::string>() : v.dump();
        return ChatMessage::assistant_tool(std::move(inv));
    }
    std::string content;
    if (msg.contains("content") && msg.at("content").is_string())
        content = msg.at("content").get<std::string>();
    return ChatMessage::assistant(std::move(content));
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& config,
                                        const std::string& script_path) {
    if (config.kind == ProviderConfig::Kind::Scripted) {
        if (script_path.empty())
            throw std::runtime_error("scripted provider needs a script file");
        return std::make_unique<ScriptedProvider>(ScriptedProvider::from_file(script_path));
    }
    return std::make_unique<LiveProvider>();
}

}  // namespace vulnmgr::llm
