#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "snipex/util.hpp"

namespace snipex::corpus {

enum class PostType { question, answer, other };
enum class BlockType { text, code };

struct PostRecord {
  int64_t id = 0;
  std::optional<int64_t> parent_id;   // set on answers
  PostType post_type = PostType::other;
  int64_t score = 0;
  std::string tags;                   // raw, e.g. "<python>"
  TimePoint created_at{};
  std::optional<int64_t> accepted_answer_id;  // set on questions
};

struct PostBlockRecord {
  int64_t block_id = 0;
  int64_t post_id = 0;
  BlockType block_type = BlockType::text;
  int64_t root_block_version_id = 0;
  std::string content;  // HTML-entity-encoded as in the dump
  int64_t line_count = 0;
  int64_t length = 0;
};

struct Snippet {
  std::string snippet_id;  // decimal block id
  int64_t post_id = 0;
  int64_t root_block_version_id = 0;
  std::string content;
  int64_t line_count = 0;
  int64_t answer_score = 0;
  bool is_accepted = false;
  TimePoint created_at{};
  int64_t github_ref_count = 0;
  std::vector<std::string> tags;
};

struct CorpusSummary {
  int64_t questions_matched = 0;
  int64_t answers_matched = 0;
  int64_t code_blocks_kept = 0;
  int64_t text_blocks_dropped = 0;
  int64_t orphan_blocks = 0;  // blocks of answers whose question is missing
};

struct IngestStats {
  int64_t rows = 0;
  int64_t skipped = 0;
};

class IngestError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class FormatError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Streaming CSV ingestion. Malformed rows are counted and skipped.
IngestStats ingest_posts(std::istream& in,
                         const std::function<void(PostRecord)>& sink);
IngestStats ingest_blocks(std::istream& in,
                          const std::function<void(PostBlockRecord)>& sink);
IngestStats ingest_posts_file(const std::string& path,
                              const std::function<void(PostRecord)>& sink);
IngestStats ingest_blocks_file(const std::string& path,
                               const std::function<void(PostBlockRecord)>& sink);

// Join answers' code blocks to questions whose raw tag string equals
// tag_filter exactly.
std::pair<std::vector<Snippet>, CorpusSummary> build_corpus(
    const std::vector<PostRecord>& posts,
    const std::vector<PostBlockRecord>& blocks,
    const std::string& tag_filter = "<python>");

enum class VersionMode { latest_per_root_block, all_versions };

std::vector<Snippet> select_versions(std::vector<Snippet> snippets,
                                     VersionMode mode);

struct ImportFrequencyTable {
  std::vector<std::pair<std::string, int64_t>> entries;  // count desc, name asc
};

ImportFrequencyTable top_imports(const std::vector<Snippet>& snippets, int n);

// refs: (post_id, url) CSV. Counts distinct urls per post id.
IngestStats attach_github_refs(std::vector<Snippet>& snippets,
                               std::istream& refs);

std::vector<std::string> parse_tags(const std::string& raw);

// Corpus file: one JSON object per line, ordered by snippet_id.
void write_corpus(std::ostream& out, std::vector<Snippet> snippets);
std::vector<Snippet> read_corpus(std::istream& in);
std::vector<Snippet> read_corpus_file(const std::string& path);

}  // namespace snipex::corpus
