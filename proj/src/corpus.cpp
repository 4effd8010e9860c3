#include "snipex/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace snipex::corpus {

using nlohmann::json;

namespace {

// RFC-4180 reader: quoted fields may contain commas, quotes and newlines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  std::optional<std::vector<std::string>> next() {
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in_.get()) != EOF) {
      any = true;
      if (in_quotes) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field += '"';
          } else {
            in_quotes = false;
          }
        } else {
          field += char(c);
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        break;
      } else if (c == '\r') {
        // swallow; CRLF handled when '\n' follows
      } else {
        field += char(c);
      }
    }
    if (!any) return std::nullopt;
    fields.push_back(std::move(field));
    if (fields.size() == 1 && fields[0].empty() && in_.peek() == EOF &&
        c == EOF)
      return std::nullopt;
    return fields;
  }

 private:
  std::istream& in_;
};

std::optional<int64_t> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

void check_header(const std::vector<std::string>& got,
                  const std::vector<std::string>& want) {
  for (size_t i = 0; i < want.size(); ++i) {
    if (i >= got.size() || got[i] != want[i])
      throw FormatError("missing or misplaced column: " + want[i]);
  }
}

int64_t count_lines(const std::string& content) {
  return static_cast<int64_t>(split_lines(content).size());
}

}  // namespace

IngestStats ingest_posts(std::istream& in,
                         const std::function<void(PostRecord)>& sink) {
  CsvReader reader(in);
  auto header = reader.next();
  if (!header) throw FormatError("empty file, expected Posts header");
  check_header(*header, {"Id", "PostTypeId", "ParentId", "AcceptedAnswerId",
                         "CreationDate", "Score", "Tags"});
  IngestStats stats;
  while (auto row = reader.next()) {
    ++stats.rows;
    if (row->size() < 7) {
      ++stats.skipped;
      continue;
    }
    auto id = parse_int((*row)[0]);
    auto type = parse_int((*row)[1]);
    auto created = parse_iso8601((*row)[4]);
    auto score = parse_int((*row)[5]);
    if (!id || !type || !created || !score) {
      ++stats.skipped;
      continue;
    }
    PostRecord rec;
    rec.id = *id;
    rec.post_type = *type == 1   ? PostType::question
                    : *type == 2 ? PostType::answer
                                 : PostType::other;
    rec.parent_id = parse_int((*row)[2]);
    rec.accepted_answer_id = parse_int((*row)[3]);
    rec.created_at = *created;
    rec.score = *score;
    rec.tags = (*row)[6];
    sink(std::move(rec));
  }
  return stats;
}

IngestStats ingest_blocks(std::istream& in,
                          const std::function<void(PostBlockRecord)>& sink) {
  CsvReader reader(in);
  auto header = reader.next();
  if (!header) throw FormatError("empty file, expected PostBlockVersion header");
  check_header(*header, {"Id", "PostId", "PostBlockTypeId",
                         "RootPostBlockVersionId", "LineCount", "Length",
                         "Content"});
  IngestStats stats;
  while (auto row = reader.next()) {
    ++stats.rows;
    if (row->size() < 7) {
      ++stats.skipped;
      continue;
    }
    auto id = parse_int((*row)[0]);
    auto post_id = parse_int((*row)[1]);
    auto type = parse_int((*row)[2]);
    auto root = parse_int((*row)[3]);
    if (!id || !post_id || !type || !root) {
      ++stats.skipped;
      continue;
    }
    PostBlockRecord rec;
    rec.block_id = *id;
    rec.post_id = *post_id;
    rec.block_type = *type == 2 ? BlockType::code : BlockType::text;
    rec.root_block_version_id = *root;
    rec.content = (*row)[6];
    rec.length = static_cast<int64_t>(rec.content.size());
    rec.line_count = count_lines(rec.content);
    sink(std::move(rec));
  }
  return stats;
}

IngestStats ingest_posts_file(const std::string& path,
                              const std::function<void(PostRecord)>& sink) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open posts file: " + path);
  return ingest_posts(in, sink);
}

IngestStats ingest_blocks_file(const std::string& path,
                               const std::function<void(PostBlockRecord)>& sink) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open post-block file: " + path);
  return ingest_blocks(in, sink);
}

std::vector<std::string> parse_tags(const std::string& raw) {
  std::vector<std::string> tags;
  std::string cur;
  bool open = false;
  for (char c : raw) {
    if (c == '<') {
      open = true;
      cur.clear();
    } else if (c == '>') {
      if (open && !cur.empty()) tags.push_back(cur);
      open = false;
    } else if (open) {
      cur += c;
    }
  }
  return tags;
}

std::pair<std::vector<Snippet>, CorpusSummary> build_corpus(
    const std::vector<PostRecord>& posts,
    const std::vector<PostBlockRecord>& blocks,
    const std::string& tag_filter) {
  if (tag_filter.empty()) throw std::invalid_argument("empty tag_filter");

  struct QuestionInfo {
    std::optional<int64_t> accepted_answer_id;
  };
  std::unordered_map<int64_t, QuestionInfo> questions;
  CorpusSummary summary;
  for (const auto& p : posts) {
    if (p.post_type == PostType::question && p.tags == tag_filter) {
      questions[p.id] = {p.accepted_answer_id};
      ++summary.questions_matched;
    }
  }

  struct AnswerInfo {
    int64_t score;
    bool accepted;
    TimePoint created_at;
    std::vector<std::string> tags;
  };
  std::unordered_set<int64_t> all_post_ids;
  for (const auto& p : posts) all_post_ids.insert(p.id);

  std::unordered_map<int64_t, AnswerInfo> answers;
  std::unordered_set<int64_t> orphan_answers;
  for (const auto& p : posts) {
    if (p.post_type != PostType::answer) continue;
    if (p.parent_id && !all_post_ids.count(*p.parent_id)) {
      orphan_answers.insert(p.id);
      continue;
    }
    if (!p.parent_id) continue;
    auto q = questions.find(*p.parent_id);
    if (q == questions.end()) continue;
    bool accepted = q->second.accepted_answer_id &&
                    *q->second.accepted_answer_id == p.id;
    answers[p.id] = {p.score, accepted, p.created_at, parse_tags(tag_filter)};
    ++summary.answers_matched;
  }

  std::vector<Snippet> snippets;
  for (const auto& b : blocks) {
    auto a = answers.find(b.post_id);
    if (a == answers.end()) {
      if (orphan_answers.count(b.post_id)) ++summary.orphan_blocks;
      continue;
    }
    if (b.block_type != BlockType::code) {
      ++summary.text_blocks_dropped;
      continue;
    }
    Snippet s;
    s.snippet_id = std::to_string(b.block_id);
    s.post_id = b.post_id;
    s.root_block_version_id = b.root_block_version_id;
    s.content = b.content;
    s.line_count = b.line_count;
    s.answer_score = a->second.score;
    s.is_accepted = a->second.accepted;
    s.created_at = a->second.created_at;
    s.github_ref_count = 0;
    s.tags = a->second.tags;
    snippets.push_back(std::move(s));
    ++summary.code_blocks_kept;
  }
  return {std::move(snippets), summary};
}

std::vector<Snippet> select_versions(std::vector<Snippet> snippets,
                                     VersionMode mode) {
  if (mode == VersionMode::all_versions) return snippets;
  std::map<int64_t, Snippet> latest;  // root id -> snippet with max block id
  for (auto& s : snippets) {
    int64_t block_id = std::stoll(s.snippet_id);
    auto it = latest.find(s.root_block_version_id);
    if (it == latest.end() || std::stoll(it->second.snippet_id) < block_id)
      latest[s.root_block_version_id] = std::move(s);
  }
  std::vector<Snippet> out;
  out.reserve(latest.size());
  for (auto& [_, s] : latest) out.push_back(std::move(s));
  return out;
}

namespace {

const std::regex kImportLine(R"(^\s*import\s+(.+)$)");
const std::regex kFromLine(R"(^\s*from\s+([A-Za-z_][A-Za-z0-9_.]*)\s+import\b)");

std::string top_segment(const std::string& dotted) {
  auto dot = dotted.find('.');
  return dot == std::string::npos ? dotted : dotted.substr(0, dot);
}

bool valid_module_name(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
    return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  return true;
}

}  // namespace

ImportFrequencyTable top_imports(const std::vector<Snippet>& snippets, int n) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  std::map<std::string, int64_t> counts;
  for (const auto& s : snippets) {
    for (const auto& line : split_lines(s.content)) {
      std::smatch m;
      if (std::regex_search(line, m, kFromLine)) {
        ++counts[top_segment(m[1].str())];
      } else if (std::regex_match(line, m, kImportLine)) {
        // "import a.b, c as d" contributes a and c
        std::stringstream items(m[1].str());
        std::string item;
        while (std::getline(items, item, ',')) {
          std::stringstream words(item);
          std::string name;
          words >> name;
          name = top_segment(name);
          if (valid_module_name(name)) ++counts[name];
        }
      }
    }
  }
  std::vector<std::pair<std::string, int64_t>> entries(counts.begin(),
                                                       counts.end());
  std::stable_sort(entries.begin(), entries.end(), [](auto& a, auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(entries.size()) > n) entries.resize(n);
  return {std::move(entries)};
}

IngestStats attach_github_refs(std::vector<Snippet>& snippets,
                               std::istream& refs) {
  CsvReader reader(refs);
  auto header = reader.next();
  if (!header) throw FormatError("empty file, expected GitHub refs header");
  check_header(*header, {"PostId", "Url"});
  IngestStats stats;
  std::unordered_map<int64_t, std::set<std::string>> urls;
  while (auto row = reader.next()) {
    ++stats.rows;
    if (row->size() < 2) {
      ++stats.skipped;
      continue;
    }
    auto post_id = parse_int((*row)[0]);
    if (!post_id || (*row)[1].empty()) {
      ++stats.skipped;
      continue;
    }
    urls[*post_id].insert((*row)[1]);
  }
  for (auto& s : snippets) {
    auto it = urls.find(s.post_id);
    s.github_ref_count = it == urls.end()
                             ? 0
                             : static_cast<int64_t>(it->second.size());
  }
  return stats;
}

namespace {

json snippet_to_json(const Snippet& s) {
  return json{{"snippet_id", s.snippet_id},
              {"post_id", s.post_id},
              {"root_block_version_id", s.root_block_version_id},
              {"content", base64_encode(s.content)},
              {"line_count", s.line_count},
              {"answer_score", s.answer_score},
              {"is_accepted", s.is_accepted},
              {"created_at", format_iso8601(s.created_at)},
              {"github_ref_count", s.github_ref_count},
              {"tags", s.tags}};
}

Snippet snippet_from_json(const json& j) {
  Snippet s;
  s.snippet_id = j.at("snippet_id").get<std::string>();
  s.post_id = j.at("post_id").get<int64_t>();
  s.root_block_version_id = j.at("root_block_version_id").get<int64_t>();
  auto content = base64_decode(j.at("content").get<std::string>());
  if (!content) throw FormatError("invalid base64 snippet content");
  s.content = *content;
  s.line_count = j.at("line_count").get<int64_t>();
  s.answer_score = j.at("answer_score").get<int64_t>();
  s.is_accepted = j.at("is_accepted").get<bool>();
  auto created = parse_iso8601(j.at("created_at").get<std::string>());
  if (!created) throw FormatError("invalid created_at timestamp");
  s.created_at = *created;
  s.github_ref_count = j.at("github_ref_count").get<int64_t>();
  s.tags = j.at("tags").get<std::vector<std::string>>();
  return s;
}

}  // namespace

void write_corpus(std::ostream& out, std::vector<Snippet> snippets) {
  std::sort(snippets.begin(), snippets.end(), [](auto& a, auto& b) {
    return std::stoll(a.snippet_id) < std::stoll(b.snippet_id);
  });
  for (const auto& s : snippets) out << snippet_to_json(s).dump() << '\n';
}

std::vector<Snippet> read_corpus(std::istream& in) {
  std::vector<Snippet> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(snippet_from_json(json::parse(line)));
  }
  return out;
}

std::vector<Snippet> read_corpus_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open corpus file: " + path);
  return read_corpus(in);
}

}  // namespace snipex::corpus
