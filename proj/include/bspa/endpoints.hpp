#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace bspa {

/// Opaque reference to generated image content. Only the image filter that
/// pairs with the generator knows how to interpret it.
struct ContentHandle {
  std::string ref;
  friend bool operator==(const ContentHandle&, const ContentHandle&) = default;
};

/// Text generator: (input description, sensitive word) -> stealthy prompt text.
class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string generate(std::string_view input_text, std::string_view word) const = 0;
};

/// Image generator: prompt text -> content handle.
class ImageGenerator {
 public:
  virtual ~ImageGenerator() = default;
  virtual ContentHandle render(std::string_view prompt) const = 0;
};

/// Text filter: prompt text -> toxicity score in [0, 1].
class TextFilter {
 public:
  virtual ~TextFilter() = default;
  virtual double score(std::string_view text) const = 0;
};

/// Image filter: content -> NSFW score in [0, 1].
class ImageFilter {
 public:
  virtual ~ImageFilter() = default;
  virtual double score(const ContentHandle& content) const = 0;
};

/// The four black-box endpoints. All implementations must be safe to call
/// concurrently; max_inflight bounds parallel calls issued by callers.
struct EndpointSuite {
  std::shared_ptr<const TextGenerator> text_gen;
  std::shared_ptr<const ImageGenerator> image_gen;
  std::shared_ptr<const TextFilter> text_filter;
  std::shared_ptr<const ImageFilter> image_filter;
  int max_inflight = 4;

  /// Throws ValidationError when any slot is empty.
  void validate() const;
};

}  // namespace bspa
