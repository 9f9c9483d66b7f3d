#ifndef CONE_TESTS_SUPPORT_HPP_
#define CONE_TESTS_SUPPORT_HPP_

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
  explicit TempDir(const std::string & name)
    : path_(std::filesystem::temp_directory_path() / ("cone_test_" + name))
  {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir &) = delete;
  TempDir & operator=(const TempDir &) = delete;

  const std::filesystem::path & path() const { return path_; }
  std::filesystem::path operator/(const std::string & leaf) const { return path_ / leaf; }

private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path & p, const std::string & text)
{
  std::ofstream os(p, std::ios::binary);
  os << text;
}

inline std::string read_file(const std::filesystem::path & p)
{
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace support

#endif  // CONE_TESTS_SUPPORT_HPP_
