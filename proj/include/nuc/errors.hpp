#pragma once

#include <stdexcept>
#include <string>

namespace nuc {

/// Base class for every error raised by the library. The category decides the
/// CLI exit code: usage errors exit 1, data errors 2, numeric errors 3.
class Error : public std::runtime_error {
 public:
  enum class Category { usage, data, numeric };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

#define NUC_DEFINE_ERROR(Name, Cat)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Category::Cat, what) {} \
  };

// Malformed file header or body.
NUC_DEFINE_ERROR(FormatError, data)
// Two inputs that must agree do not (row counts, ids).
NUC_DEFINE_ERROR(ConsistencyError, data)
// Values outside their domain (NaN vectors, confidence > 1, ...).
NUC_DEFINE_ERROR(DataError, data)
NUC_DEFINE_ERROR(IoError, data)
NUC_DEFINE_ERROR(BuildError, data)
NUC_DEFINE_ERROR(QueryError, data)
NUC_DEFINE_ERROR(ShapeError, data)
NUC_DEFINE_ERROR(LookupError, data)
NUC_DEFINE_ERROR(DegenerateTaskError, data)
NUC_DEFINE_ERROR(UndefinedMetricError, data)
NUC_DEFINE_ERROR(UnsupportedInputError, data)
NUC_DEFINE_ERROR(ConfigError, usage)
NUC_DEFINE_ERROR(UsageError, usage)
NUC_DEFINE_ERROR(NumericError, numeric)

#undef NUC_DEFINE_ERROR

}  // namespace nuc
