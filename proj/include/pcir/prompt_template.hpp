#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pcir::llm {

enum class SectionKind { Instruction, Demonstration, Input };

struct TemplateSection {
    SectionKind kind;
    std::string text;
};

/// Prompt layout loaded from a template file. Files are plain text with one
/// section header per line ("[instruction]", "[demonstration]", "[input]")
/// followed by that section's text; placeholders are written "{name}".
/// Exactly one instruction and one input section; at most one demonstration
/// pattern in a file, expanded to k literal copies for k-shot prompts.
struct PromptTemplate {
    std::string name;
    std::vector<TemplateSection> sections;

    static PromptTemplate parse(std::string name, std::string_view text);
    static PromptTemplate load(const std::filesystem::path& path);

    std::size_t count(SectionKind kind) const;
    /// nullptr when the template has no demonstration section.
    const TemplateSection* demonstration_pattern() const;

    /// Copy with the demonstration pattern replaced by the given
    /// already-rendered texts, in order. Rendering demonstrations onto a
    /// template without a pattern is an error.
    PromptTemplate with_demonstrations(const std::vector<std::string>& rendered) const;
};

/// Substitutes "{name}" markers; an unknown name raises an error naming the
/// placeholder. Braces not enclosing a well-formed name are literal text.
std::string render_text(std::string_view pattern, const std::map<std::string, std::string>& slots);

/// Renders every section and joins them with single blank lines.
std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& slots);

}  // namespace pcir::llm
