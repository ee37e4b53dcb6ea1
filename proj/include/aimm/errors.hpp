#ifndef AIMM_ERRORS_HPP
#define AIMM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace aimm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A transform argument fell outside the domain where the closed forms hold.
class DomainViolation : public Error {
public:
    DomainViolation(int component, double lower, double upper, double re_u, std::string context = {})
        : Error(describe(component, lower, upper, re_u, context)),
          component_(component), lower_(lower), upper_(upper), re_u_(re_u) {}

    int component() const noexcept { return component_; }
    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    double real_part() const noexcept { return re_u_; }

    /// Same violation, attributed to a component of a product process.
    DomainViolation at_component(int index, const std::string& context = {}) const {
        return DomainViolation(index, lower_, upper_, re_u_, context);
    }

private:
    static std::string describe(int c, double lo, double hi, double re, const std::string& ctx) {
        std::string s = "domain violation";
        if (!ctx.empty()) s += " (" + ctx + ")";
        if (c >= 0) s += " at component " + std::to_string(c);
        s += ": Re(u)=" + std::to_string(re) + " outside (" + std::to_string(lo) + ", " +
             std::to_string(hi) + ")";
        return s;
    }

    int component_;
    double lower_, upper_, re_u_;
};

/// No admissible damping parameter exists for a Fourier contour.
class ContourError : public Error {
public:
    using Error::Error;
};

/// The truncated Fourier integral did not reach its error target.
class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double estimate) : Error(what), estimate_(estimate) {}
    double estimate() const noexcept { return estimate_; }

private:
    double estimate_;
};

/// An implied volatility was requested for a price outside the no-arbitrage band.
class NoSolution : public Error {
public:
    using Error::Error;
};

/// A one-dimensional root could not be bracketed.
class RootBracketError : public Error {
public:
    RootBracketError(const std::string& what, int index = -1) : Error(what), index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

class OptimizerFailure : public Error {
public:
    using Error::Error;
};

/// Malformed input file: missing field, wrong type, unparsable number.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a model or market invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace aimm

#endif // AIMM_ERRORS_HPP
