#pragma once

// Strict reader for JSON config objects; shared by the config parsers.

#include <initializer_list>
#include <set>
#include <string>
#include <type_traits>
#include <utility>

#include "mmu/errors.hpp"
#include "mmu/io.hpp"

namespace mmu::detail {

// Reads the fields of one config object, remembering which keys were used.
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    read(*it, key, out);
  }

  template <class E>
  void get_enum(const std::string& key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_string())
      for (const auto& [name, value] : names)
        if (*it == name) {
          out = value;
          return;
        }
    std::string allowed;
    for (const auto& n : names) allowed += std::string(allowed.empty() ? "" : "|") + n.first;
    throw ConfigError(where(key) + ": expected one of " + allowed);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(where(item.key()) + ": unknown field");
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

 private:
  template <class T>
  void read(const Json& v, const std::string& key, T& out) const {
    if constexpr (std::is_same_v<T, Json>) {
      out = v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where(key) + ": expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) out = v.get<T>();
        else if (v.get<long long>() >= 0) out = static_cast<T>(v.get<long long>());
        else throw ConfigError(where(key) + ": expected a nonnegative integer");
      } else {
        out = v.get<T>();
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
      out = v.get<std::string>();
    } else {
      // std::vector<...> and std::array<...>
      if (!v.is_array()) throw ConfigError(where(key) + ": expected an array");
      T tmp{};
      if constexpr (requires { tmp.push_back({}); }) {
        for (std::size_t i = 0; i < v.size(); ++i) {
          typename T::value_type e{};
          read(v[i], key + "[" + std::to_string(i) + "]", e);
          tmp.push_back(e);
        }
      } else {
        if (v.size() != tmp.size())
          throw ConfigError(where(key) + ": expected " + std::to_string(tmp.size()) + " elements");
        for (std::size_t i = 0; i < v.size(); ++i) read(v[i], key + "[" + std::to_string(i) + "]", tmp[i]);
      }
      out = std::move(tmp);
    }
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class C>
void validated(const C& c, const std::string& path) {
  try {
    c.validate();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(path + ".", 0) == 0) throw;
    throw ConfigError(path + ": " + what);
  }
}

}  // namespace mmu::detail
