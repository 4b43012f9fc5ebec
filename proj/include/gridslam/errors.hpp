/* errors.hpp */

#ifndef GRIDSLAM_ERRORS_HPP
#define GRIDSLAM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gridslam {

/* Base class of every error raised by the library */
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/* Point or pose outside the grid */
class OutOfBounds : public Error
{
public:
    using Error::Error;
};

/* Argument outside the support of a density (e.g. reading not in (0, d_max)) */
class DomainError : public Error
{
public:
    using Error::Error;
};

/* Truncated geometric over an empty consistency set */
class EmptySet : public Error
{
public:
    using Error::Error;
};

/* Every log-weight is log-zero */
class AllZeroWeights : public Error
{
public:
    using Error::Error;
};

/* Invalid parameter combination */
class InvalidArgument : public Error
{
public:
    using Error::Error;
};

/* Simulator: pose inside an obstacle */
class InsideWall : public Error
{
public:
    using Error::Error;
};

/* Simulator: straight segment to the next waypoint crosses a wall */
class UnreachableWaypoint : public Error
{
public:
    using Error::Error;
};

/* World violates its own invariants */
class InvalidWorld : public Error
{
public:
    using Error::Error;
};

/* Malformed input file; carries the 1-based line number */
class ParseError : public Error
{
public:
    ParseError(std::size_t line, const std::string& what) :
        Error("line " + std::to_string(line) + ": " + what),
        mLine(line) { }

    std::size_t line() const noexcept { return this->mLine; }

private:
    std::size_t mLine;
};

/* Well-formed input that does not match the declared schema */
class SchemaError : public ParseError
{
public:
    using ParseError::ParseError;
};

/* World file with rows of unequal width */
class RaggedRows : public ParseError
{
public:
    using ParseError::ParseError;
};

class GeometryMismatch : public Error
{
public:
    using Error::Error;
};

class LengthMismatch : public Error
{
public:
    using Error::Error;
};

class IOError : public Error
{
public:
    using Error::Error;
};

} // namespace gridslam

#endif // GRIDSLAM_ERRORS_HPP
