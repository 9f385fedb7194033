#include "pcir/prompt_template.hpp"

#include <algorithm>
#include <sstream>

#include "pcir/errors.hpp"
#include "pcir/formats.hpp"

namespace pcir::llm {

namespace {

bool placeholder_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_';
}

std::string trim_blank_edges(const std::vector<std::string>& lines) {
    std::size_t begin = 0;
    std::size_t end = lines.size();
    auto blank = [](const std::string& line) {
        return line.find_first_not_of(" \t\r") == std::string::npos;
    };
    while (begin < end && blank(lines[begin])) ++begin;
    while (end > begin && blank(lines[end - 1])) --end;
    std::string text;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) text += '\n';
        std::string line = lines[i];
        while (!line.empty() && line.back() == '\r') line.pop_back();
        text += line;
    }
    return text;
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string name, std::string_view text) {
    PromptTemplate result;
    result.name = std::move(name);

    std::istringstream stream{std::string(text)};
    std::string line;
    bool in_section = false;
    SectionKind kind = SectionKind::Instruction;
    std::vector<std::string> lines;
    auto flush = [&]() {
        if (in_section) result.sections.push_back({kind, trim_blank_edges(lines)});
        lines.clear();
    };
    std::size_t line_number = 0;
    while (std::getline(stream, line)) {
        ++line_number;
        std::string header = line;
        while (!header.empty() && (header.back() == '\r' || header.back() == ' ')) {
            header.pop_back();
        }
        if (header == "[instruction]" || header == "[demonstration]" || header == "[input]") {
            flush();
            in_section = true;
            kind = header == "[instruction]" ? SectionKind::Instruction
                   : header == "[demonstration]" ? SectionKind::Demonstration
                                                 : SectionKind::Input;
            continue;
        }
        if (header.size() > 1 && header.front() == '[' && header.back() == ']') {
            throw ParseError("template '" + result.name + "' line " +
                             std::to_string(line_number) + ": unknown section header " + header);
        }
        if (!in_section) {
            if (header.find_first_not_of(" \t") == std::string::npos) continue;
            throw ParseError("template '" + result.name + "' line " +
                             std::to_string(line_number) + ": text before the first section");
        }
        lines.push_back(line);
    }
    flush();

    // Layout must be instruction, optional demonstrations, then input.
    std::size_t instructions = result.count(SectionKind::Instruction);
    std::size_t inputs = result.count(SectionKind::Input);
    if (instructions != 1 || inputs != 1) {
        throw ValidationError("template '" + result.name +
                              "' needs exactly one instruction and one input section");
    }
    int phase = 0;  // 0 = instruction, 1 = demonstrations, 2 = input
    for (const auto& section : result.sections) {
        int wanted = section.kind == SectionKind::Instruction ? 0
                     : section.kind == SectionKind::Demonstration ? 1
                                                                  : 2;
        if (wanted < phase) {
            throw ValidationError("template '" + result.name +
                                  "' sections out of order: instruction, demonstrations, "
                                  "then input");
        }
        phase = wanted;
    }
    if (result.count(SectionKind::Demonstration) > 1) {
        throw ValidationError("template '" + result.name +
                              "' may hold at most one demonstration pattern");
    }
    return result;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    return parse(path.stem().string(), read_file(path));
}

std::size_t PromptTemplate::count(SectionKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(sections.begin(), sections.end(),
                      [kind](const TemplateSection& s) { return s.kind == kind; }));
}

const TemplateSection* PromptTemplate::demonstration_pattern() const {
    for (const auto& section : sections) {
        if (section.kind == SectionKind::Demonstration) return &section;
    }
    return nullptr;
}

PromptTemplate PromptTemplate::with_demonstrations(
    const std::vector<std::string>& rendered) const {
    if (!rendered.empty() && demonstration_pattern() == nullptr) {
        throw ValidationError("template '" + name + "' has no demonstration section");
    }
    PromptTemplate result;
    result.name = name;
    for (const auto& section : sections) {
        if (section.kind != SectionKind::Demonstration) {
            result.sections.push_back(section);
            continue;
        }
        // The pattern sits between instruction and input; emit the literal
        // copies in its place.
        for (const auto& text : rendered) {
            result.sections.push_back({SectionKind::Demonstration, text});
        }
    }
    return result;
}

std::string render_text(std::string_view pattern,
                        const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(pattern.size());
    std::size_t i = 0;
    while (i < pattern.size()) {
        char c = pattern[i];
        if (c != '{') {
            out += c;
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < pattern.size() && placeholder_char(pattern[j])) ++j;
        if (j > i + 1 && j < pattern.size() && pattern[j] == '}') {
            std::string key(pattern.substr(i + 1, j - i - 1));
            auto it = slots.find(key);
            if (it == slots.end()) {
                throw ValidationError("no slot value for placeholder '" + key + "'");
            }
            out += it->second;
            i = j + 1;
        } else {
            out += c;  // literal brace (e.g. a JSON example in the instruction)
            ++i;
        }
    }
    return out;
}

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& slots) {
    std::string out;
    for (std::size_t i = 0; i < tmpl.sections.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += render_text(tmpl.sections[i].text, slots);
    }
    return out;
}

}  // namespace pcir::llm
