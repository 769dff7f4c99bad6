// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/prompt/descriptions.hpp"

#include <algorithm>
#include <cctype>

#include "alia/error.hpp"
#include "alia/hash.hpp"

namespace alia::prompt {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view source_name(DescriptionSource s) {
    return s == DescriptionSource::user_provided ? "user" : "alia";
}

DescriptionSource parse_source(const std::string& s) {
    if (s == "alia") return DescriptionSource::alia_generated;
    if (s == "user") return DescriptionSource::user_provided;
    throw ValidationError("source", "unknown description source '" + s + "'");
}

// The text with the placeholder removed, for class-name checks: "{ }" must
// not be confused with a class name and vice versa.
std::string without_placeholder(std::string_view text) {
    std::string out(text);
    for (auto pos = out.find(kPlaceholder); pos != std::string::npos; pos = out.find(kPlaceholder, pos)) {
        out.replace(pos, kPlaceholder.size(), " ");
    }
    return out;
}

void check_text(std::string_view text, std::string_view field, std::span<const std::string> classes) {
    const auto n = count_placeholders(text);
    if (n != 1) {
        throw ValidationError(std::string(field), "expected exactly one '{ }' placeholder, found " + std::to_string(n));
    }
    if (auto cls = find_class_mention(without_placeholder(text), classes)) {
        throw ValidationError(std::string(field), "mentions class '" + *cls + "'");
    }
}

}  // namespace

std::size_t count_placeholders(std::string_view text) {
    std::size_t n = 0;
    for (auto pos = text.find(kPlaceholder); pos != std::string_view::npos; pos = text.find(kPlaceholder, pos + 1)) ++n;
    return n;
}

DomainDescription make_description(std::string template_text, std::string prefix, DescriptionSource source) {
    const auto n = count_placeholders(template_text);
    if (n != 1) {
        throw ValidationError("template", "expected exactly one '{ }' placeholder, found " + std::to_string(n));
    }
    DomainDescription d;
    d.id = sha256_hex(template_text).substr(0, 16);
    d.template_text = std::move(template_text);
    d.prefix = std::move(prefix);
    d.source = source;
    return d;
}

void check_description(const DomainDescription& description, std::span<const std::string> classes) {
    check_text(description.template_text, "template", classes);
    if (description.instruction_template) check_text(*description.instruction_template, "instruction_template", classes);
}

std::optional<std::string> find_class_mention(std::string_view text, std::span<const std::string> classes) {
    const std::string hay = lower(text);
    for (const auto& c : classes) {
        if (!c.empty() && hay.find(lower(c)) != std::string::npos) return c;
    }
    return std::nullopt;
}

std::string instantiate(std::string_view template_text, std::string_view class_name) {
    const auto pos = template_text.find(kPlaceholder);
    if (pos == std::string_view::npos || count_placeholders(template_text) != 1) {
        throw ValidationError("template", "expected exactly one '{ }' placeholder");
    }
    std::string out(template_text.substr(0, pos));
    out += class_name;
    out += template_text.substr(pos + kPlaceholder.size());
    return out;
}

std::string instantiate_prompt(const DomainDescription& description, std::string_view class_name) {
    return instantiate(description.template_text, class_name);
}

std::string to_template(std::string_view sentence, std::string_view class_name) {
    const auto pos = sentence.find(class_name);
    if (class_name.empty() || pos == std::string_view::npos ||
        sentence.find(class_name, pos + 1) != std::string_view::npos) {
        throw ValidationError("template", "class name must occur exactly once");
    }
    std::string out(sentence.substr(0, pos));
    out += kPlaceholder;
    out += sentence.substr(pos + class_name.size());
    return out;
}

InstructionForm to_instruction(const DomainDescription& description) {
    if (description.instruction_template) return {*description.instruction_template, false};
    const std::string& t = description.template_text;
    const std::string anchor = std::string("a ") + std::string(kPlaceholder);
    const auto pos = t.find(anchor);
    if (pos == std::string::npos) return {t, true};
    std::string rest = t.substr(pos + anchor.size());
    // Instructions read better without the closing full stop.
    while (!rest.empty() && (rest.back() == '.' || rest.back() == ' ')) rest.pop_back();
    return {"put the " + std::string(kPlaceholder) + rest, true};
}

json description_to_json(const DomainDescription& d) {
    json j = {{"id", d.id}, {"template", d.template_text}, {"prefix", d.prefix}, {"source", source_name(d.source)}};
    if (d.instruction_template) j["instruction_template"] = *d.instruction_template;
    return j;
}

DomainDescription description_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("descriptions", "each description must be an object");
    if (!j.contains("template") || !j["template"].is_string()) throw ValidationError("template", "missing template");
    auto d = make_description(j["template"].get<std::string>(), j.value("prefix", std::string{}),
                              parse_source(j.value("source", std::string("alia"))));
    if (j.contains("id")) d.id = j["id"].get<std::string>();
    if (j.contains("instruction_template") && !j["instruction_template"].is_null()) {
        d.instruction_template = j["instruction_template"].get<std::string>();
    }
    return d;
}

json descriptions_to_json(std::span<const DomainDescription> descriptions) {
    json arr = json::array();
    for (const auto& d : descriptions) arr.push_back(description_to_json(d));
    return arr;
}

std::vector<DomainDescription> descriptions_from_json(const json& j) {
    if (!j.is_array()) throw ValidationError("descriptions", "expected an array");
    std::vector<DomainDescription> out;
    for (const auto& e : j) out.push_back(description_from_json(e));
    return out;
}

}  // namespace alia::prompt
