// Scenario runner and wire-format inspector for the tracker/base/webserver
// simulator. `run` executes a bundled scenario (or a scenario JSON file)
// deterministically and writes a JSON report; exit status reflects the
// scenario's expectations.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fitsim/runner.hpp"
#include "fitsim/scenarios.hpp"

namespace {

using namespace fitsim;

Scenario load_scenario(const std::string& ref) {
    if (scenarios::registry().count(ref)) return scenarios::by_name(ref);
    std::ifstream in(ref);
    if (!in) throw Error(Err::Parse, "no bundled scenario or readable file named " + ref);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw Error(Err::Parse, e.what());
    }
    return scenario_from_json(j);
}

int cmd_run(const std::string& ref, std::uint64_t seed, bool seed_set, const std::string& out_path,
            bool show_trace, bool quiet) {
    Scenario sc = load_scenario(ref);
    ScenarioRunner runner;
    Report report = runner.run(sc, seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt);
    Json j = report.to_json();

    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << j.dump(2) << "\n";
    }
    if (!quiet) {
        std::cout << "scenario: " << report.scenario << "  seed: " << report.seed << "\n";
        for (const auto& e : report.expectations)
            std::cout << (e.pass ? "  ok   " : "  FAIL ") << e.name
                      << (e.pass ? "" : "  [" + e.detail + "]") << "\n";
        std::cout << (report.passed ? "PASSED" : "FAILED") << " ("
                  << report.expectations.size() << " expectations)\n";
        if (show_trace) std::cout << render_trace(j);
    }
    return report.passed ? 0 : 1;
}

int cmd_wire(const std::string& what, const std::string& hex) {
    using namespace fitsim::wire;
    if (what == "decode-opcode") {
        Opcode op = decode_opcode(from_hex(hex));
        const char* kind = op.kind == OpKind::TrqReq    ? "TRQ-REQ"
                           : op.kind == OpKind::ReadTrq ? "READ-TRQ"
                           : op.kind == OpKind::Write   ? "WRITE"
                           : op.kind == OpKind::Erase   ? "ERASE"
                                                        : "CLOSE";
        std::cout << kind << " bank=" << int(op.bank) << " data_length=" << int(op.data_length)
                  << " deadline=" << op.deadline << "\n";
    } else if (what == "decode-record") {
        FitnessRecord r = decode_record(from_hex(hex));
        std::cout << "timestamp=" << r.timestamp << " calories=" << r.calories
                  << " steps=" << r.steps << " distance_cm=" << r.distance_cm
                  << " floors=" << r.floors << "\n";
    } else if (what == "decode-response") {
        Response r = decode_response(from_hex(hex));
        const char* kind = r.kind == RespKind::Ok        ? "OK"
                           : r.kind == RespKind::TrqInfo ? "TRQ-INFO"
                           : r.kind == RespKind::TrqData ? "TRQ-DATA"
                                                         : "CLEAR";
        std::cout << kind << " payload=" << to_hex(r.payload) << "\n";
    } else {
        throw Error(Err::Parse, "unknown wire action " + what);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fitsim: tracker protocol simulator, attack suite and defense harness"};
    app.require_subcommand(1);

    // run
    std::string scenario_ref, out_path;
    std::uint64_t seed = 0;
    bool show_trace = false, quiet = false;
    auto* run = app.add_subcommand("run", "run a scenario and report pass/fail");
    run->add_option("scenario", scenario_ref, "bundled scenario name or scenario JSON path")
        ->required();
    auto* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out", out_path, "write the JSON report here");
    run->add_flag("--trace", show_trace, "print the phase-labeled message trace");
    run->add_flag("--quiet", quiet, "suppress the expectation listing");

    // list-scenarios
    auto* list = app.add_subcommand("list-scenarios", "list the bundled scenarios");

    // dump-scenario
    std::string dump_name, dump_out;
    auto* dump = app.add_subcommand("dump-scenario", "print a bundled scenario as JSON");
    dump->add_option("scenario", dump_name, "bundled scenario name")->required();
    dump->add_option("--out", dump_out, "write to a file instead of stdout");

    // dump-trace
    std::string report_path;
    auto* trace = app.add_subcommand("dump-trace", "render the message trace of a report");
    trace->add_option("report", report_path, "report JSON produced by run --out")->required();

    // wire
    std::string wire_action, wire_hex;
    auto* wire_cmd = app.add_subcommand("wire", "decode wire formats from hex");
    wire_cmd->add_option("action", wire_action, "decode-opcode | decode-record | decode-response")
        ->required();
    wire_cmd->add_option("hex", wire_hex, "hex bytes")->required();

    // encode-opcode
    std::string enc_kind;
    std::uint32_t enc_bank = 0, enc_len = 0, enc_deadline = 0;
    auto* enc = app.add_subcommand("encode-opcode", "build a 7-byte opcode and print hex");
    enc->add_option("kind", enc_kind, "trq-req | read-trq | write | erase | close")->required();
    enc->add_option("--bank", enc_bank, "memory bank index");
    enc->add_option("--len", enc_len, "WRITE payload length");
    enc->add_option("--deadline", enc_deadline, "ERASE deadline, seconds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(scenario_ref, seed, seed_opt->count() > 0, out_path, show_trace, quiet);
        if (*list) {
            for (const auto& [name, make] : fitsim::scenarios::registry())
                std::cout << name << "  -  " << make().description << "\n";
            return 0;
        }
        if (*dump) {
            fitsim::Json j = fitsim::to_json(fitsim::scenarios::by_name(dump_name));
            if (dump_out.empty()) {
                std::cout << j.dump(2) << "\n";
            } else {
                std::ofstream out(dump_out);
                out << j.dump(2) << "\n";
            }
            return 0;
        }
        if (*trace) {
            std::ifstream in(report_path);
            if (!in) throw fitsim::Error(fitsim::Err::Parse, "cannot read " + report_path);
            fitsim::Json j;
            in >> j;
            std::cout << fitsim::render_trace(j);
            return 0;
        }
        if (*wire_cmd) return cmd_wire(wire_action, wire_hex);
        if (*enc) {
            using namespace fitsim::wire;
            Opcode op;
            if (enc_kind == "trq-req") op.kind = OpKind::TrqReq;
            else if (enc_kind == "read-trq") op.kind = OpKind::ReadTrq;
            else if (enc_kind == "write") op.kind = OpKind::Write;
            else if (enc_kind == "erase") op.kind = OpKind::Erase;
            else if (enc_kind == "close") op.kind = OpKind::Close;
            else throw fitsim::Error(fitsim::Err::Parse, "unknown opcode kind " + enc_kind);
            op.bank = static_cast<std::uint8_t>(enc_bank);
            op.data_length = static_cast<std::uint8_t>(enc_len);
            op.deadline = enc_deadline;
            std::cout << fitsim::to_hex(encode_opcode(op)) << "\n";
            return 0;
        }
    } catch (const fitsim::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == fitsim::Err::Parse ? 2 : 1;
    }
    return 2;
}
