// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/error.hpp"
#include "slidekit/trainer/trainer.hpp"

namespace slidekit::trainer {
namespace {

void reject_markers(const DialogueTemplate& t, std::string_view field, std::string_view text) {
  for (const std::string* marker :
       {&t.begin, &t.end, &t.inst_open, &t.inst_close, &t.sys_open, &t.sys_close}) {
    if (!marker->empty() && text.find(*marker) != std::string_view::npos)
      throw EscapingError("dialogue " + std::string(field) + " contains the marker '" + *marker +
                          "'");
  }
}

std::string header(const DialogueTemplate& t) {
  return t.begin + t.inst_open + " " + t.sys_open + "\n";
}

}  // namespace

std::string format_dialogue(const DialogueTemplate& t, std::string_view system,
                            std::string_view user, const std::optional<std::string>& assistant) {
  reject_markers(t, "system prompt", system);
  reject_markers(t, "user text", user);
  if (assistant) reject_markers(t, "assistant text", *assistant);

  std::string out = header(t);
  out += system;
  out += "\n" + t.sys_close + "\n\n";
  out += user;
  out += " " + t.inst_close;
  if (assistant && !assistant->empty()) out += " " + *assistant + t.end;
  return out;
}

Dialogue parse_dialogue(const DialogueTemplate& t, std::string_view text) {
  const std::string head = header(t);
  if (text.substr(0, head.size()) != head) throw FormatError("dialogue does not start with the header");
  text.remove_prefix(head.size());

  const std::string sys_end = "\n" + t.sys_close + "\n\n";
  const auto sys_at = text.find(sys_end);
  if (sys_at == std::string_view::npos) throw FormatError("dialogue has no closed system block");
  Dialogue d;
  d.system = std::string(text.substr(0, sys_at));
  text.remove_prefix(sys_at + sys_end.size());

  const std::string close = " " + t.inst_close;
  const auto close_at = text.find(close);
  if (close_at == std::string_view::npos) throw FormatError("dialogue has no instruction close");
  d.user = std::string(text.substr(0, close_at));
  text.remove_prefix(close_at + close.size());

  if (!text.empty()) {
    if (text.front() != ' ' || text.size() < 1 + t.end.size() ||
        text.substr(text.size() - t.end.size()) != t.end)
      throw FormatError("dialogue assistant turn is not terminated");
    d.assistant = std::string(text.substr(1, text.size() - 1 - t.end.size()));
  }
  return d;
}

}  // namespace slidekit::trainer
