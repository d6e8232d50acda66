#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

// "host:port" -> (host, port). A bare port binds/connects to 127.0.0.1.
inline std::pair<std::string, std::uint16_t> split_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  const std::string host = colon == std::string::npos ? "127.0.0.1" : text.substr(0, colon);
  const std::string port = colon == std::string::npos ? text : text.substr(colon + 1);
  std::size_t used = 0;
  unsigned long value = 0;
  try {
    value = std::stoul(port, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port.size() || port.empty() || value > 65535) {
    throw std::invalid_argument("bad endpoint '" + text + "', expected host:port");
  }
  return {host.empty() ? "127.0.0.1" : host, static_cast<std::uint16_t>(value)};
}
