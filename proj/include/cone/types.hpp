#ifndef CONE_TYPES_HPP_
#define CONE_TYPES_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cone {

template<typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Row-major so that one row is one sample; rows are handed out as contiguous views.
template<typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vectord = Vector<double>;
using Matrixd = Matrix<double>;

enum class Sentiment : std::uint8_t { positive = 0, neutral = 1, negative = 2 };

inline constexpr int kSentimentCount = 3;

inline std::string_view to_string(Sentiment s)
{
  switch (s) {
    case Sentiment::positive: return "positive";
    case Sentiment::neutral: return "neutral";
    case Sentiment::negative: return "negative";
  }
  return "neutral";
}

inline Sentiment sentiment_from_string(std::string_view s)
{
  if (s == "positive") return Sentiment::positive;
  if (s == "neutral") return Sentiment::neutral;
  if (s == "negative") return Sentiment::negative;
  throw std::invalid_argument("unknown sentiment label '" + std::string(s) + "'");
}

/// Errors raised for malformed inputs or violated preconditions.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or input files, detected before any work is done.
class ValidationError : public Error
{
public:
  using Error::Error;
};

/// splitmix64 finaliser over (seed, index); used to derive per-stage seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index)
{
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Cosine similarity; zero vectors compare as 0.
template<typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA> & a, const Eigen::MatrixBase<DerivedB> & b)
{
  using Scalar = typename DerivedA::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) { return Scalar(0); }
  return a.dot(b) / (na * nb);
}

}  // namespace cone

#endif  // CONE_TYPES_HPP_
