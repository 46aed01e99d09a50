#include "fwiki/frame_model.hpp"

#include <set>
#include <unordered_set>

namespace fwiki {

Document new_document(std::string uri, std::vector<Frame> frames, DocumentFlavor flavor) {
  std::unordered_set<std::size_t> seen;
  for (const auto& f : frames) {
    if (!seen.insert(f.id).second) {
      throw StructureError("duplicate frame id " + std::to_string(f.id) + " in " + uri);
    }
  }

  Document doc;
  doc.uri = std::move(uri);
  doc.flavor = flavor;
  doc.frames = std::move(frames);
  doc.root.id = "root";
  doc.root.children.reserve(doc.frames.size());
  for (std::size_t i = 0; i < doc.frames.size(); ++i) {
    doc.frames[i].id = i;
    doc.root.children.emplace_back(FrameRef{i});
  }
  return doc;
}

std::string reconstruct_source(const Document& doc) {
  std::string out;
  for (const auto& f : doc.frames) {
    out += f.leading_sep;
    out += f.command_text;
    out += f.trailing_sep;
  }
  return out;
}

namespace {

void validate_rec(const SceneNode& scene, const Document& owner,
                  std::vector<const SceneNode*>& path, std::set<std::string>& ids) {
  for (const SceneNode* p : path) {
    if (p == &scene) throw StructureError("scene '" + scene.id + "' contains itself");
  }
  if (!scene.id.empty() && !ids.insert(scene.id).second) {
    throw StructureError("scene '" + scene.id + "' contains itself");
  }
  path.push_back(&scene);
  for (const auto& child : scene.children) {
    if (const auto* ref = std::get_if<FrameRef>(&child)) {
      if (owner.frame(ref->frame_id) == nullptr) {
        throw StructureError("scene '" + scene.id + "' references missing frame " +
                             std::to_string(ref->frame_id));
      }
    } else if (const auto* nested = std::get_if<std::shared_ptr<const SceneNode>>(&child)) {
      if (!*nested) throw StructureError("scene '" + scene.id + "' has a null child");
      validate_rec(**nested, owner, path, ids);
    }
  }
  path.pop_back();
  if (!scene.id.empty()) ids.erase(scene.id);
}

}  // namespace

void validate_scene(const SceneNode& scene, const Document& owner) {
  std::vector<const SceneNode*> path;
  std::set<std::string> ids;
  validate_rec(scene, owner, path, ids);
}

std::string escape_html(std::string_view text) {
  std::string out;
  out.reserve(text.size() + text.size() / 8);
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string broken_reference_marker(std::string_view target) {
  return "<span class=\"" + std::string(kBrokenRefClass) + "\" title=\"unresolved reference\">" +
         escape_html(target) + "</span>";
}

std::string render_island(std::string_view label, std::string_view uri,
                          std::string_view anchor, std::string_view body_html) {
  std::string out = "<details class=\"island\" data-doc=\"";
  out += escape_html(uri);
  out += "\" data-anchor=\"";
  out += escape_html(anchor);
  out += "\"><summary>";
  out += escape_html(label);
  out += "</summary><pre class=\"formal\">";
  out += body_html;
  out += "</pre></details>";
  return out;
}

namespace {

// Remote documents currently being rendered, for cross-document cycles.
struct RenderContext {
  const SceneRegistry* registry;
  std::vector<std::string> remote_stack;
  bool first_frame = true;
};

void render_rec(const SceneNode& scene, const Document& owner, RenderContext& ctx,
                std::string& out) {
  for (const auto& child : scene.children) {
    if (const auto* ref = std::get_if<FrameRef>(&child)) {
      const Frame* f = owner.frame(ref->frame_id);
      if (f == nullptr) {
        out += broken_reference_marker(owner.uri + "#frame-" + std::to_string(ref->frame_id));
        continue;
      }
      if (!ctx.first_frame) out += escape_html(f->leading_sep);
      ctx.first_frame = false;
      out += f->markup ? *f->markup : escape_html(f->command_text);
    } else if (const auto* nested = std::get_if<std::shared_ptr<const SceneNode>>(&child)) {
      if (!*nested) continue;
      out += "<span class=\"scene\" data-scene=\"" + escape_html((*nested)->id) + "\">";
      render_rec(**nested, owner, ctx, out);
      out += "</span>";
    } else {
      const auto& remote = std::get<RemoteRef>(child);
      const std::string target = remote.uri + "#" + remote.anchor;
      const std::string& label = remote.label.empty() ? remote.anchor : remote.label;
      bool cyclic = false;
      for (const auto& s : ctx.remote_stack) cyclic = cyclic || s == target;
      std::optional<ResolvedScene> resolved;
      if (!cyclic && ctx.registry != nullptr) resolved = ctx.registry->resolve(remote.uri, remote.anchor);
      if (!resolved || !resolved->document || !resolved->scene) {
        out += broken_reference_marker(target);
        continue;
      }
      RenderContext inner{ctx.registry, ctx.remote_stack, true};
      inner.remote_stack.push_back(target);
      std::string body;
      render_rec(*resolved->scene, *resolved->document, inner, body);
      out += render_island(label, remote.uri, remote.anchor, body);
    }
  }
}

}  // namespace

std::string render_scene(const SceneNode& scene, const Document& owner,
                         const SceneRegistry* registry) {
  RenderContext ctx{registry, {}, true};
  std::string out;
  render_rec(scene, owner, ctx, out);
  return out;
}

}  // namespace fwiki
