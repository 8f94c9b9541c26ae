#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace alterforge {

enum class Errc {
  invalid_argument,
  unknown_axis,
  value_range,
  duration_range,
  empty_script,
  invalid_script,
  trace_too_long,
  unknown_segment,
  transport,
  empty_completion,
  too_many_lines,
  compile_failed,
  missing_fixture,
  unknown_record,
  storage_io,
  schema_version_mismatch,
  degenerate_input,
  degenerate_rank,
  invalid_state,
  conflict,
  malformed,
};

std::string_view to_string(Errc code) noexcept;

// Domain failure carrying a machine-readable code. Everything thrown by the
// library derives from this.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Value-or-error for operations whose failures are ordinary data (parsing).
template <class T, class E>
class Result {
 public:
  Result(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
  Result(E error) : storage_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const noexcept { return storage_.index() == 0; }
  explicit operator bool() const noexcept { return ok(); }

  const T& value() const& { return std::get<0>(storage_); }
  T& value() & { return std::get<0>(storage_); }
  T&& value() && { return std::get<0>(std::move(storage_)); }

  const E& error() const& { return std::get<1>(storage_); }

  const T* operator->() const { return &std::get<0>(storage_); }
  const T& operator*() const& { return std::get<0>(storage_); }

 private:
  std::variant<T, E> storage_;
};

}  // namespace alterforge
