#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fwiki {

enum class FrameKind { command, standalone_comment };

/// One prover command together with everything remembered about it.
///
/// `leading_sep` holds the whitespace that preceded the frame in the source.
/// `trailing_sep` is only ever non-empty on the last frame of a script and
/// holds whitespace that follows the final frame.
struct Frame {
  std::size_t id = 0;
  std::string command_text;
  std::string leading_sep;
  std::string trailing_sep;
  std::optional<std::string> response;
  std::optional<std::size_t> state_number;
  std::optional<std::string> markup;
  FrameKind kind = FrameKind::command;
  bool unterminated = false;

  bool operator==(const Frame&) const = default;
};

struct FrameRef {
  std::size_t frame_id = 0;
  bool operator==(const FrameRef&) const = default;
};

/// Points at an entity of another document: `uri#anchor`.
struct RemoteRef {
  std::string uri;
  std::string anchor;
  std::string label;
  bool operator==(const RemoteRef&) const = default;
};

struct SceneNode;
using SceneChild = std::variant<FrameRef, std::shared_ptr<const SceneNode>, RemoteRef>;

struct SceneNode {
  std::string id;
  std::optional<std::string> language;
  std::vector<SceneChild> children;
};

enum class DocumentFlavor { formal_script, informal_page };

struct Document {
  std::string uri;
  std::vector<Frame> frames;
  SceneNode root;
  DocumentFlavor flavor = DocumentFlavor::formal_script;

  const Frame* frame(std::size_t id) const {
    return id < frames.size() ? &frames[id] : nullptr;
  }
};

class StructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds a document whose root scene references every frame in order.
/// Frame ids are renumbered 0..n-1 following the input order.
/// Throws StructureError when the input repeats a frame id.
Document new_document(std::string uri, std::vector<Frame> frames, DocumentFlavor flavor);

/// Concatenation of every frame's separators and command text.
std::string reconstruct_source(const Document& doc);

/// Throws StructureError when a scene transitively contains itself (by id or
/// by node identity) or when a frame reference is out of range for `owner`.
void validate_scene(const SceneNode& scene, const Document& owner);

struct ResolvedScene {
  std::shared_ptr<const Document> document;
  std::shared_ptr<const SceneNode> scene;
};

/// Resolves remote references `uri#anchor` to a scene of another document.
class SceneRegistry {
 public:
  virtual ~SceneRegistry() = default;
  virtual std::optional<ResolvedScene> resolve(std::string_view uri,
                                               std::string_view anchor) const = 0;
};

std::string escape_html(std::string_view text);

/// Inline marker emitted in place of anything that failed to resolve.
std::string broken_reference_marker(std::string_view target);
inline constexpr std::string_view kBrokenRefClass = "broken-ref";

/// Collapsible container used for transcluded formal content.
std::string render_island(std::string_view label, std::string_view uri,
                          std::string_view anchor, std::string_view body_html);

/// Depth-first rendering of a scene tree. Frames emit their stored markup
/// (or escaped command text when no markup was computed); every frame after
/// the first one rendered by this call is preceded by its escaped leading
/// separator. Nested scenes become group containers and remote references
/// become islands. Dangling references never throw.
std::string render_scene(const SceneNode& scene, const Document& owner,
                         const SceneRegistry* registry);

}  // namespace fwiki
