// Single translation unit for the amalgamated Catch2 implementation (and its
// default main); every test target links against this.
#include <catch2/catch_amalgamated.cpp>
