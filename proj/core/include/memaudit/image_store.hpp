// Copyright 2026 The memaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace memaudit {

using ImageBytes = std::vector<std::uint8_t>;

// Content-addressed image identifier: the id is a digest of the bytes.
struct ImageRef {
  std::string id;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
  friend auto operator<=>(const ImageRef&, const ImageRef&) = default;
};

ImageRef make_image_ref(std::span<const std::uint8_t> bytes);

class ImageStore {
 public:
  virtual ~ImageStore() = default;
  virtual ImageRef put(std::span<const std::uint8_t> bytes) = 0;
  virtual std::optional<ImageBytes> get(const ImageRef& ref) const = 0;
  bool contains(const ImageRef& ref) const { return get(ref).has_value(); }
};

class InMemoryImageStore final : public ImageStore {
 public:
  ImageRef put(std::span<const std::uint8_t> bytes) override;
  std::optional<ImageBytes> get(const ImageRef& ref) const override;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, ImageBytes> images_;
};

// One file per image, named by its id, under a root directory.
class FileImageStore final : public ImageStore {
 public:
  explicit FileImageStore(std::filesystem::path root);
  ImageRef put(std::span<const std::uint8_t> bytes) override;
  std::optional<ImageBytes> get(const ImageRef& ref) const override;
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
  mutable std::mutex mu_;
};

// Only [0-9a-f] ids are accepted, so a ref can be used as a file name.
bool is_valid_image_id(std::string_view id);

ImageBytes read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace memaudit
