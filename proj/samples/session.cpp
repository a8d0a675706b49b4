// In-process session on the mock models: a few turns, two queries, one
// consolidation cycle, optional snapshot.
// usage: sample_session [config] [snapshot_dir]
#include <iostream>

#include "lightmem/lightmem.hpp"

using namespace lightmem;

int run(int argc, char** argv) {
    EngineConfig cfg;
    if (argc > 1 && *argv[1]) cfg = load_config(argv[1]);
    cfg.write_behind = false;
    Engine engine(cfg);

    engine.observe_turn("alice", "I am allergic to peanuts", "noted");
    engine.observe_turn("alice", "My sister Mira lives in Porto", "nice city");
    engine.observe_turn("kb", "the capital of portugal is lisbon", "ok");

    for (const char* q : {"What am I allergic to?", "Where does my sister live?"}) {
        auto r = engine.handle_query("alice", q);
        std::cout << "Q: " << q << "\nA: " << r.answer << "\n";
        for (const auto& e : r.retrieval.retrieved.entries)
            std::cout << "   " << e.ref() << "  " << e.final_score << "  " << e.summary << "\n";
    }

    auto cycle = engine.consolidate();
    std::cout << "consolidated " << cycle.batch_size << " items, " << cycle.inserted << " new LTM nodes\n";

    if (argc > 2) {
        auto s = engine.snapshot(argv[2]);
        std::cout << "snapshot " << argv[2] << " digest " << s.digest() << "\n";
    }
    return 0;
}

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
