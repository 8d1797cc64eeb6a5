import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { App } from "../src/app";
import { formatPercent, render } from "../src/render";
import { StubServer } from "./stub";

function setup(options = {}) {
  document.body.innerHTML = '<div id="root"></div>';
  const root = document.getElementById("root") as HTMLElement;
  const stub = new StubServer();
  Object.assign(stub.options, options);
  const app = new App(root, new ApiClient("http://stub", stub.transport));
  return { root, stub, app };
}

async function startAndFill(app: App): Promise<void> {
  await app.start();
  app.updateField("baseline_carla", "2.2");
  app.updateField("age_years", "34");
  app.updateField("payer", "Medicaid");
  app.updateField("location", "L01");
  app.updateField("county", "Davidson");
}

function cardTexts(root: HTMLElement, selector: string): string[] {
  return Array.from(root.querySelectorAll(`.card ${selector}`)).map(
    (node) => node.textContent ?? "",
  );
}

describe("S1: submit_intake renders server-ordered cards verbatim", () => {
  it("renders one card per recommendation in server order", async () => {
    const { root, stub, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const served = stub.served[0];
    const ids = Array.from(root.querySelectorAll(".card")).map((node) =>
      node.getAttribute("data-package"),
    );
    expect(ids).toEqual(served.recommendations.map((r) => r.package_id));
    expect(ids.length).toBe(3);
  });

  it("shows probabilities exactly as served, one-decimal percent", async () => {
    const { root, stub, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const served = stub.served[0];
    const shown = cardTexts(root, ".card-prob");
    expect(shown).toEqual(
      served.recommendations.map((r) => formatPercent(r.p_above)),
    );
    // the transport is the only source of numbers on screen
    const allowed = new Set(
      served.recommendations.map((r) => formatPercent(r.p_above)),
    );
    for (const text of shown) expect(allowed.has(text)).toBe(true);
  });

  it("equal server probabilities display as equal percentages", async () => {
    const { root, stub, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const served = stub.served[0];
    const tied = served.recommendations.filter((r) => r.p_above === 0.3);
    expect(tied.length).toBeGreaterThan(1);
    const texts = new Set(
      tied.map((r) =>
        root.querySelector(`.card[data-package="${r.package_id}"] .card-prob`)
          ?.textContent,
      ),
    );
    expect(texts.size).toBe(1);
  });

  it("shows the active model name and version from the response", async () => {
    const { root, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    expect(root.querySelector(".model-info")?.textContent).toBe(
      "Active model: stub v1",
    );
  });

  it("keeps submit disabled until required fields are valid", async () => {
    const { root, app } = setup();
    await app.start();
    const button = () =>
      root.querySelector(".submit") as HTMLButtonElement;
    expect(button().disabled).toBe(true);
    app.updateField("baseline_carla", "2.2");
    expect(button().disabled).toBe(true);
    app.updateField("age_years", "34");
    expect(button().disabled).toBe(false);
    app.updateField("baseline_carla", "2.3"); // off the 0.2 grid
    expect(button().disabled).toBe(true);
  });
});

describe("S2: what_if_edit re-scores and re-ranks", () => {
  it("adding case management raises the edited package's rank", async () => {
    const { root, stub, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const before = stub.served[0].recommendations.find(
      (r) => r.package_id === "pkg-a",
    );
    expect(before?.p_above).toBe(0.3);

    app.openEditor("pkg-a"); // prefill: therapy x8
    app.addEditorRow();
    app.updateEditorRow(1, "case_management", "4");
    await app.submitEditor();

    const after = stub.served[1];
    const custom = after.recommendations.find(
      (r) => r.package_id === "custom-1",
    );
    expect(custom?.p_above).toBe(0.9);
    expect(custom!.rank).toBeLessThan(
      after.recommendations.find((r) => r.package_id === "pkg-a")!.rank,
    );
    const shown = root.querySelector(
      '.card[data-package="custom-1"] .card-prob',
    );
    expect(shown?.textContent).toBe(formatPercent(0.9));
  });

  it("editor validates unknown service codes before any request", async () => {
    const { root, stub, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const requestsBefore = stub.requests.length;
    app.openEditor(null);
    app.updateEditorRow(0, "acupuncture", "2");
    await app.submitEditor();
    expect(stub.requests.length).toBe(requestsBefore);
    expect(root.querySelector(".editor-error")?.textContent).toContain(
      "unknown service code",
    );
  });

  it("blocks an empty package before any request", async () => {
    const { root, stub, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const requestsBefore = stub.requests.length;
    app.openEditor(null);
    app.updateEditorRow(0, "", "1");
    await app.submitEditor();
    expect(stub.requests.length).toBe(requestsBefore);
    expect(root.querySelector(".editor-error")?.textContent).toContain(
      "at least one service",
    );
  });

  it("an edit reverted to the original volumes scores identically", async () => {
    const { stub, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const original = stub.served[0].recommendations.find(
      (r) => r.package_id === "pkg-b",
    );
    app.openEditor("pkg-b");
    // the prefilled rows are exactly pkg-b's volumes: submit unchanged
    await app.submitEditor();
    const rescored = stub.served[1].recommendations.find(
      (r) => r.package_id === "custom-1",
    );
    expect(rescored?.p_above).toBe(original?.p_above);
  });

  it("previous results stay visible until the new response lands", async () => {
    const { root, stub, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    stub.holdResponses();
    app.openEditor("pkg-a");
    const pending = app.submitEditor();
    // old cards still on screen while the re-score is in flight
    expect(root.querySelectorAll(".card").length).toBe(3);
    stub.releaseResponse(0);
    await pending;
    expect(root.querySelectorAll(".card").length).toBe(4);
  });
});

describe("S3: server-side 400s render inline field errors", () => {
  it("names the offending control", async () => {
    const { root, app } = setup({ forceFieldError: "baseline_carla" });
    await startAndFill(app);
    await app.submitIntake();
    const error = root.querySelector(
      '[data-field="baseline_carla"] .field-error',
    );
    expect(error?.textContent).toContain("baseline_carla");
    const input = root.querySelector(
      "#input-baseline_carla",
    ) as HTMLInputElement;
    expect(input.getAttribute("aria-invalid")).toBe("true");
  });

  it("network failure shows a retry banner, never a blank screen", async () => {
    const { root, stub, app } = setup({ offline: true });
    await startAndFill(app);
    await app.submitIntake();
    expect(root.querySelector(".banner-error")).not.toBeNull();
    expect(root.querySelector(".retry")).not.toBeNull();
    // recovery: service comes back, retry succeeds
    stub.options.offline = false;
    (root.querySelector(".retry") as HTMLButtonElement).click();
    await new Promise((resolve) => setTimeout(resolve, 20));
    expect(root.querySelectorAll(".card").length).toBeGreaterThan(0);
  });
});

describe("view purity and sequencing", () => {
  it("replaying the same state reproduces the exact DOM", async () => {
    const { root, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const first = root.innerHTML;
    app.renderNow();
    expect(root.innerHTML).toBe(first);
  });

  it("identical submissions produce identical responses and DOM", async () => {
    const { root, stub, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const dom1 = root.innerHTML;
    await app.submitIntake();
    expect(JSON.stringify(stub.served[1])).toBe(JSON.stringify(stub.served[0]));
    expect(root.innerHTML).toBe(dom1);
  });

  it("a newer submission supersedes the stale in-flight one", async () => {
    const { root, stub, app } = setup();
    await startAndFill(app);
    stub.holdResponses();
    const first = app.submitIntake();
    const second = app.submitIntake(); // aborts the first
    stub.releaseResponse(1);
    await Promise.allSettled([first, second]);
    expect(stub.served.length).toBe(1);
    expect(root.querySelectorAll(".card").length).toBe(3);
  });

  it("comparison pane shows exactly the two selected packages", async () => {
    const { root, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    app.toggleSelect("pkg-a");
    app.toggleSelect("pkg-b");
    const rows = root.querySelectorAll(".comparison-table tr[data-package]");
    expect(rows.length).toBe(2);
    app.toggleSelect("pkg-c"); // replaces the oldest selection
    const ids = Array.from(
      root.querySelectorAll(".comparison-table tr[data-package]"),
    ).map((r) => r.getAttribute("data-package"));
    expect(ids).toEqual(["pkg-b", "pkg-c"]);
  });
});

describe("accessibility", () => {
  it("every control has an associated label", async () => {
    const { root, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const inputs = root.querySelectorAll("input, select");
    for (const input of inputs) {
      const id = input.getAttribute("id");
      expect(id).toBeTruthy();
      expect(root.querySelector(`label[for="${id}"]`)).not.toBeNull();
    }
  });

  it("rank order is conveyed in text", async () => {
    const { root, app } = setup();
    await startAndFill(app);
    await app.submitIntake();
    const badges = cardTexts(root, ".rank-badge");
    expect(badges).toEqual(["Rank 1", "Rank 2", "Rank 3"]);
  });
});
