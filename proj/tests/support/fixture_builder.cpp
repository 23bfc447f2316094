// Builds an SQLite file from a .sql script: fixture_builder <script.sql> <out.db>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sqlite3.h>

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <script.sql> <out.db>\n", argv[0]);
    return 2;
  }
  std::ifstream in(argv[1]);
  if (!in) {
    std::fprintf(stderr, "cannot read %s\n", argv[1]);
    return 1;
  }
  std::stringstream script;
  script << in.rdbuf();

  const std::string tmp = std::string(argv[2]) + ".tmp";
  std::filesystem::remove(tmp);
  sqlite3* db = nullptr;
  if (sqlite3_open(tmp.c_str(), &db) != SQLITE_OK) {
    std::fprintf(stderr, "cannot create %s\n", tmp.c_str());
    return 1;
  }
  char* err = nullptr;
  const std::string body = "BEGIN;\n" + script.str() + "\nCOMMIT;";
  if (sqlite3_exec(db, body.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::fprintf(stderr, "%s: %s\n", argv[1], err ? err : "unknown error");
    sqlite3_free(err);
    sqlite3_close(db);
    return 1;
  }
  sqlite3_close(db);
  std::filesystem::rename(tmp, argv[2]);
  return 0;
}
