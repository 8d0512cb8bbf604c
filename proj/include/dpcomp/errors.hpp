#pragma once

#include <stdexcept>
#include <string>

namespace dpcomp {

// Base for every error thrown by the library. CLI maps these to exit code 1.
class CalculusError : public std::runtime_error {
public:
    explicit CalculusError(const std::string& what) : std::runtime_error(what) {}
};

#define DPCOMP_DEFINE_ERROR(Name)                                        \
    class Name : public CalculusError {                                  \
    public:                                                              \
        explicit Name(const std::string& what)                           \
            : CalculusError(std::string(#Name) + ": " + what) {}         \
    }

DPCOMP_DEFINE_ERROR(EmptyUniverse);
DPCOMP_DEFINE_ERROR(CapExceeded);
DPCOMP_DEFINE_ERROR(UnsupportedClass);
DPCOMP_DEFINE_ERROR(NotInClass);
DPCOMP_DEFINE_ERROR(OrderedUnsupported);
DPCOMP_DEFINE_ERROR(ClassMismatch);
DPCOMP_DEFINE_ERROR(NegativeScale);
DPCOMP_DEFINE_ERROR(FlavorMismatch);
DPCOMP_DEFINE_ERROR(DependencyFlagMissing);
DPCOMP_DEFINE_ERROR(NotASubsetMap);
DPCOMP_DEFINE_ERROR(NotAPartition);
DPCOMP_DEFINE_ERROR(NeedTwoBlocks);
DPCOMP_DEFINE_ERROR(DomainError);
DPCOMP_DEFINE_ERROR(RangeTooSmall);
DPCOMP_DEFINE_ERROR(OutcomeCapExceeded);
DPCOMP_DEFINE_ERROR(PrefixMismatch);
DPCOMP_DEFINE_ERROR(NotATuple);
DPCOMP_DEFINE_ERROR(ParseError);
DPCOMP_DEFINE_ERROR(UnresolvedReference);
DPCOMP_DEFINE_ERROR(SchemaVersionMismatch);
DPCOMP_DEFINE_ERROR(CacheCorrupt);

#undef DPCOMP_DEFINE_ERROR

// Raised when a closed-form rule's precondition does not hold. The message
// names the violated condition so callers can pick the fallback rule.
class PreconditionFailed : public CalculusError {
public:
    explicit PreconditionFailed(const std::string& condition)
        : CalculusError("PreconditionFailed: " + condition), condition_(condition) {}
    const std::string& condition() const { return condition_; }

private:
    std::string condition_;
};

}  // namespace dpcomp
