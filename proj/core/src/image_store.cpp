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

#include "memaudit/image_store.hpp"

#include <fstream>
#include <iterator>

#include "memaudit/error.hpp"
#include "memaudit/hashing.hpp"

namespace memaudit {

ImageRef make_image_ref(std::span<const std::uint8_t> bytes) { return ImageRef{content_id(bytes)}; }

bool is_valid_image_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

ImageRef InMemoryImageStore::put(std::span<const std::uint8_t> bytes) {
  ImageRef ref = make_image_ref(bytes);
  std::lock_guard lock(mu_);
  images_.try_emplace(ref.id, bytes.begin(), bytes.end());
  return ref;
}

std::optional<ImageBytes> InMemoryImageStore::get(const ImageRef& ref) const {
  std::lock_guard lock(mu_);
  auto it = images_.find(ref.id);
  if (it == images_.end()) return std::nullopt;
  return it->second;
}

std::size_t InMemoryImageStore::size() const {
  std::lock_guard lock(mu_);
  return images_.size();
}

FileImageStore::FileImageStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

ImageRef FileImageStore::put(std::span<const std::uint8_t> bytes) {
  ImageRef ref = make_image_ref(bytes);
  std::lock_guard lock(mu_);
  const auto path = root_ / ref.id;
  if (!std::filesystem::exists(path)) {
    const auto tmp = root_ / (ref.id + ".tmp");
    write_file_bytes(tmp, bytes);
    std::filesystem::rename(tmp, path);
  }
  return ref;
}

std::optional<ImageBytes> FileImageStore::get(const ImageRef& ref) const {
  if (!is_valid_image_id(ref.id)) return std::nullopt;
  const auto path = root_ / ref.id;
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  return read_file_bytes(path);
}

ImageBytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  return ImageBytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

}  // namespace memaudit
