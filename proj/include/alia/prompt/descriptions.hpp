// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace alia::prompt {

inline constexpr std::string_view kPlaceholder = "{ }";

enum class DescriptionSource { alia_generated, user_provided };

// Class-agnostic prompt template with exactly one "{ }" where the class name
// goes, e.g. "a photo of a { } bird perched on a branch."
struct DomainDescription {
    std::string id;
    std::string template_text;
    std::string prefix;
    std::optional<std::string> instruction_template;
    DescriptionSource source = DescriptionSource::alia_generated;

    friend bool operator==(const DomainDescription&, const DomainDescription&) = default;
};

// Builds a description with a content-derived id; throws ValidationError if
// the placeholder does not occur exactly once.
DomainDescription make_description(std::string template_text, std::string prefix,
                                   DescriptionSource source = DescriptionSource::alia_generated);

std::size_t count_placeholders(std::string_view text);

// Throws ValidationError (field "template" or "instruction_template") when
// the placeholder count is wrong or a class name appears in the text
// (case-insensitive substring).
void check_description(const DomainDescription& description, std::span<const std::string> classes);

// First class name found in `text`, case-insensitively.
std::optional<std::string> find_class_mention(std::string_view text, std::span<const std::string> classes);

std::string instantiate(std::string_view template_text, std::string_view class_name);
std::string instantiate_prompt(const DomainDescription& description, std::string_view class_name);

// Inverse of instantiate: replaces the single occurrence of class_name.
std::string to_template(std::string_view sentence, std::string_view class_name);

struct InstructionForm {
    std::string template_text;
    bool needs_review = false;
};

// Instruction-style template for instruction-following editors. An explicit
// instruction_template wins; otherwise "<...> of a { } X" becomes
// "put the { } X" and is flagged for review.
InstructionForm to_instruction(const DomainDescription& description);

nlohmann::json description_to_json(const DomainDescription& description);
DomainDescription description_from_json(const nlohmann::json& j);
nlohmann::json descriptions_to_json(std::span<const DomainDescription> descriptions);
std::vector<DomainDescription> descriptions_from_json(const nlohmann::json& j);

}  // namespace alia::prompt
