CRITERIA = {
    1: "cross-representation of every quadratic form",
    2: "brute-force phase grid at (1,2,0)",
    3: "SDP classification, duality gap, embedding",
    4: "whitening",
    5: "convergence plateau",
    6: "method ordering over the P_s sweep",
    7: "hybrid gain at P_i = 40 dBm",
    8: "K = 0 degeneration",
    9: "feasibility of every returned configuration",
    10: "byte-identical CSV reruns",
}


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            name = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in name or rep.when not in ("call", "setup"):
                continue
            n = int(name.split("test_criterion_")[1].split("_")[0])
            detail = dict(rep.user_properties).get("detail", "")
            ok = key == "passed"
            if n in outcomes:
                prev_ok, prev_detail = outcomes[n]
                ok, detail = prev_ok and ok, "; ".join(d for d in (prev_detail, detail) if d)
            outcomes[n] = (ok, detail)
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(outcomes):
        ok, detail = outcomes[n]
        line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {CRITERIA.get(n, '')}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
