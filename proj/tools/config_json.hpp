#pragma once

#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace uqkit::cli {

// JSON config files: top-level keys are global option names (no dashes),
// nested objects are keyed by subcommand name and hold that subcommand's
// options. Command-line values take precedence over config values.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        nlohmann::ordered_json j = app_to_json(app, default_also);
        return j.dump(2) + "\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(input);
        } catch (const nlohmann::json::parse_error& e) {
            throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object())
            throw CLI::ConfigError("config must be a JSON object");
        std::vector<CLI::ConfigItem> out;
        walk(j, {}, out);
        return out;
    }

private:
    static std::string scalar_str(const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        return v.dump();
    }

    static void walk(const nlohmann::json& j, const std::vector<std::string>& parents,
                     std::vector<CLI::ConfigItem>& out) {
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                std::vector<std::string> deeper = parents;
                deeper.push_back(key);
                walk(value, deeper, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (const auto& e : value) item.inputs.push_back(scalar_str(e));
            else
                item.inputs.push_back(scalar_str(value));
            out.push_back(std::move(item));
        }
    }

    static nlohmann::ordered_json app_to_json(const CLI::App* app, bool default_also) {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (!opt->get_configurable()) continue;
            const std::string name = opt->get_single_name();
            if (name.empty()) continue;
            if (!opt->results().empty()) {
                const auto& results = opt->results();
                if (results.size() == 1)
                    j[name] = results.front();
                else
                    j[name] = results;
            } else if (default_also) {
                j[name] = opt->get_default_str();
            }
        }
        for (const CLI::App* sub : app->get_subcommands({})) {
            nlohmann::ordered_json nested = app_to_json(sub, default_also);
            if (!nested.empty()) j[sub->get_name()] = std::move(nested);
        }
        return j;
    }
};

} // namespace uqkit::cli
