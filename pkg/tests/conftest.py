import hypothesis

hypothesis.settings.register_profile("fast", max_examples=20)
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("default", deadline=None)
hypothesis.settings.load_profile("default")

# criterion number -> {"title": str, "outcomes": [bool], "details": [str]}
_criteria: dict[int, dict] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    slot = _criteria.setdefault(number, {"title": title, "outcomes": [], "details": []})
    slot["outcomes"].append(call.excinfo is None)
    slot["details"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        slot = _criteria[number]
        verdict = "PASS" if all(slot["outcomes"]) else "FAIL"
        detail = "; ".join(slot["details"])
        line = f"[{verdict}] {number}. {slot['title']}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
