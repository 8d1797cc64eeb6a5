import {
  AppState,
  packageName,
  packageVolumes,
} from "./state";
import { DIAGNOSES, GENDERS, RACES, REGION_TYPES } from "./types";
import { intakeValid } from "./validation";

/**
 * Probabilities render as one-decimal percentages of the server value;
 * the UI never does probability arithmetic beyond this formatting, so
 * server ties stay ties on screen.
 */
export function formatPercent(pAbove: number): string {
  return `${(pAbove * 100).toFixed(1)}%`;
}

export interface Handlers {
  onFieldInput: (name: string, value: string | boolean) => void;
  onSubmit: () => void;
  onRetry: () => void;
  onToggleSelect: (packageId: string) => void;
  onEditPackage: (packageId: string | null) => void;
  onEditorRow: (index: number, code: string, count: string) => void;
  onEditorAddRow: () => void;
  onEditorRemoveRow: (index: number) => void;
  onEditorName: (name: string) => void;
  onEditorSubmit: () => void;
  onEditorCancel: () => void;
}

/** Pure view: the DOM is a function of (state, handlers) only. */
export function render(
  root: HTMLElement,
  state: AppState,
  handlers: Handlers,
): void {
  root.textContent = "";
  root.appendChild(renderBanner(state, handlers));
  const layout = el("div", { class: "layout" });
  layout.appendChild(renderForm(state, handlers));
  layout.appendChild(renderResults(state, handlers));
  root.appendChild(layout);
}

function el(
  tag: string,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderBanner(state: AppState, handlers: Handlers): HTMLElement {
  const banner = el("div", { class: "banner", role: "status" });
  if (state.networkError) {
    banner.classList.add("banner-error");
    banner.appendChild(
      el("span", { class: "banner-text" },
         `Could not reach the scoring service: ${state.networkError}`),
    );
    const retry = el("button", { type: "button", class: "retry" }, "Retry");
    retry.addEventListener("click", handlers.onRetry);
    banner.appendChild(retry);
  } else if (state.pending) {
    banner.appendChild(el("span", { class: "banner-text" }, "Scoring..."));
  } else if (state.response) {
    const model = state.response.model;
    banner.appendChild(
      el("span", { class: "banner-text model-info" },
         `Active model: ${model.name} v${model.version}`),
    );
  } else {
    banner.appendChild(
      el("span", { class: "banner-text" },
         "Enter the intake profile and submit to rank service packages."),
    );
  }
  return banner;
}

interface FieldDef {
  name: string;
  label: string;
  kind: "number" | "select" | "text" | "checkbox";
  options?: readonly string[];
  step?: string;
  min?: string;
  max?: string;
}

const FIELDS: FieldDef[] = [
  { name: "baseline_carla", label: "Baseline CARLA (1.0-4.0)", kind: "number",
    step: "0.2", min: "1.0", max: "4.0" },
  { name: "age_years", label: "Age (years)", kind: "number", step: "1", min: "18" },
  { name: "gender", label: "Gender", kind: "select", options: GENDERS },
  { name: "race", label: "Race", kind: "select", options: RACES },
  { name: "diagnosis_category", label: "Diagnosis category", kind: "select",
    options: DIAGNOSES },
  { name: "payer", label: "Payer", kind: "text" },
  { name: "location", label: "Clinic location", kind: "text" },
  { name: "county", label: "County", kind: "text" },
  { name: "region_type", label: "Region type", kind: "select",
    options: REGION_TYPES },
  { name: "toms_symptom_baseline", label: "TOMS symptom score (optional)",
    kind: "number", step: "1" },
  { name: "toms_functioning_baseline", label: "TOMS functioning score (optional)",
    kind: "number", step: "1" },
  { name: "prior_mobile_crisis", label: "Previous mobile crisis encounter",
    kind: "checkbox" },
];

function renderForm(state: AppState, handlers: Handlers): HTMLElement {
  const form = el("form", { class: "intake-form", "aria-label": "Patient intake" });
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.onSubmit();
  });
  for (const field of FIELDS) {
    form.appendChild(renderField(field, state, handlers));
  }
  const submit = el("button", {
    type: "submit",
    class: "submit",
  }, "Rank service packages") as HTMLButtonElement;
  submit.disabled = !intakeValid(state.form) || state.pending;
  form.appendChild(submit);
  return form;
}

function renderField(
  field: FieldDef,
  state: AppState,
  handlers: Handlers,
): HTMLElement {
  const wrap = el("div", { class: "field", "data-field": field.name });
  const inputId = `input-${field.name}`;
  wrap.appendChild(el("label", { for: inputId }, field.label));
  const error = state.fieldErrors[field.name];
  let input: HTMLElement;
  if (field.kind === "select") {
    input = el("select", { id: inputId, name: field.name });
    for (const option of field.options ?? []) {
      const node = el("option", { value: option }, option) as HTMLOptionElement;
      node.selected = String(value_of(state, field.name)) === option;
      input.appendChild(node);
    }
    input.addEventListener("change", (event) => {
      handlers.onFieldInput(field.name, (event.target as HTMLSelectElement).value);
    });
  } else if (field.kind === "checkbox") {
    input = el("input", { id: inputId, name: field.name, type: "checkbox" });
    (input as HTMLInputElement).checked = Boolean(value_of(state, field.name));
    input.addEventListener("change", (event) => {
      handlers.onFieldInput(field.name, (event.target as HTMLInputElement).checked);
    });
  } else {
    input = el("input", {
      id: inputId,
      name: field.name,
      type: field.kind,
      ...(field.step ? { step: field.step } : {}),
      ...(field.min ? { min: field.min } : {}),
      ...(field.max ? { max: field.max } : {}),
    });
    const current = value_of(state, field.name);
    (input as HTMLInputElement).value = current === null ? "" : String(current);
    input.addEventListener("input", (event) => {
      handlers.onFieldInput(field.name, (event.target as HTMLInputElement).value);
    });
  }
  if (error) {
    input.setAttribute("aria-invalid", "true");
    input.setAttribute("aria-describedby", `err-${field.name}`);
  }
  wrap.appendChild(input);
  if (error) {
    wrap.appendChild(
      el("p", { class: "field-error", id: `err-${field.name}`, role: "alert" },
         error),
    );
  }
  return wrap;
}

function value_of(state: AppState, name: string): unknown {
  return (state.form as unknown as Record<string, unknown>)[name];
}

function renderResults(state: AppState, handlers: Handlers): HTMLElement {
  const pane = el("section", {
    class: "results",
    "aria-label": "Ranked service packages",
  });
  if (!state.response) {
    pane.appendChild(el("p", { class: "placeholder" }, "No ranking yet."));
    return pane;
  }
  const list = el("ol", { class: "cards" });
  for (const rec of state.response.recommendations) {
    list.appendChild(renderCard(rec.package_id, rec.rank, rec.p_above, state, handlers));
  }
  pane.appendChild(list);
  pane.appendChild(renderComparison(state));
  pane.appendChild(renderEditor(state, handlers));
  return pane;
}

function renderCard(
  packageId: string,
  rank: number,
  pAbove: number,
  state: AppState,
  handlers: Handlers,
): HTMLElement {
  const item = el("li", { class: "card", "data-package": packageId });
  const selected = state.selection.includes(packageId);
  if (selected) item.classList.add("card-selected");
  item.appendChild(el("span", { class: "rank-badge" }, `Rank ${rank}`));
  item.appendChild(el("h3", { class: "card-name" }, packageName(state, packageId)));
  item.appendChild(
    el("p", { class: "card-prob" }, formatPercent(pAbove)),
  );
  const volumes = packageVolumes(state, packageId);
  if (volumes) {
    const services = Object.entries(volumes)
      .map(([code, count]) => `${code} x${count}`)
      .join(", ");
    item.appendChild(el("p", { class: "card-services" }, services));
  }
  const compare = el("button", { type: "button", class: "compare-toggle" },
                     selected ? "Remove from comparison" : "Compare") as HTMLButtonElement;
  compare.addEventListener("click", () => handlers.onToggleSelect(packageId));
  item.appendChild(compare);
  const edit = el("button", { type: "button", class: "edit-package" },
                  "What if...") as HTMLButtonElement;
  edit.addEventListener("click", () => handlers.onEditPackage(packageId));
  item.appendChild(edit);
  return item;
}

function renderComparison(state: AppState): HTMLElement {
  const pane = el("section", {
    class: "comparison",
    "aria-label": "Package comparison",
  });
  if (state.selection.length !== 2 || !state.response) return pane;
  const byId = new Map(
    state.response.recommendations.map((r) => [r.package_id, r]),
  );
  const table = el("table", { class: "comparison-table" });
  const head = el("tr");
  head.appendChild(el("th", {}, "Package"));
  head.appendChild(el("th", {}, "Rank"));
  head.appendChild(el("th", {}, "Probability of above-average outcome"));
  table.appendChild(head);
  for (const packageId of state.selection) {
    const rec = byId.get(packageId);
    if (!rec) continue;
    const row = el("tr", { "data-package": packageId });
    row.appendChild(el("td", {}, packageName(state, packageId)));
    row.appendChild(el("td", {}, `Rank ${rec.rank}`));
    row.appendChild(el("td", {}, formatPercent(rec.p_above)));
    table.appendChild(row);
  }
  pane.appendChild(table);
  return pane;
}

function renderEditor(state: AppState, handlers: Handlers): HTMLElement {
  const pane = el("section", {
    class: "editor",
    "aria-label": "Custom package editor",
  });
  if (!state.editor) {
    const open = el("button", { type: "button", class: "editor-open" },
                    "Compose a custom package") as HTMLButtonElement;
    open.addEventListener("click", () => handlers.onEditPackage(null));
    pane.appendChild(open);
    return pane;
  }
  const editor = state.editor;
  pane.appendChild(el("h3", {}, "What-if package"));
  const nameWrap = el("div", { class: "field" });
  nameWrap.appendChild(el("label", { for: "editor-name" }, "Package name"));
  const nameInput = el("input", {
    id: "editor-name", type: "text",
  }) as HTMLInputElement;
  nameInput.value = editor.name;
  nameInput.addEventListener("input", () =>
    handlers.onEditorName(nameInput.value),
  );
  nameWrap.appendChild(nameInput);
  pane.appendChild(nameWrap);

  editor.rows.forEach((row, index) => {
    const rowWrap = el("div", { class: "editor-row", "data-row": String(index) });
    const codeId = `editor-code-${index}`;
    rowWrap.appendChild(el("label", { for: codeId }, "Service code"));
    const codeInput = el("input", { id: codeId, type: "text", class: "editor-code" }) as HTMLInputElement;
    codeInput.value = row.code;
    const countId = `editor-count-${index}`;
    const countLabel = el("label", { for: countId }, "Encounters");
    const countInput = el("input", {
      id: countId, type: "number", min: "1", step: "1", class: "editor-count",
    }) as HTMLInputElement;
    countInput.value = String(row.count);
    const update = () =>
      handlers.onEditorRow(index, codeInput.value, countInput.value);
    codeInput.addEventListener("input", update);
    countInput.addEventListener("input", update);
    rowWrap.appendChild(codeInput);
    rowWrap.appendChild(countLabel);
    rowWrap.appendChild(countInput);
    const remove = el("button", { type: "button", class: "editor-remove" },
                      "Remove") as HTMLButtonElement;
    remove.addEventListener("click", () => handlers.onEditorRemoveRow(index));
    rowWrap.appendChild(remove);
    pane.appendChild(rowWrap);
  });

  const add = el("button", { type: "button", class: "editor-add" },
                 "Add service") as HTMLButtonElement;
  add.addEventListener("click", handlers.onEditorAddRow);
  pane.appendChild(add);

  if (editor.error) {
    pane.appendChild(
      el("p", { class: "editor-error", role: "alert" }, editor.error),
    );
  }
  const submit = el("button", { type: "button", class: "editor-submit" },
                    "Re-score with this package") as HTMLButtonElement;
  submit.addEventListener("click", handlers.onEditorSubmit);
  pane.appendChild(submit);
  const cancel = el("button", { type: "button", class: "editor-cancel" },
                    "Cancel") as HTMLButtonElement;
  cancel.addEventListener("click", handlers.onEditorCancel);
  pane.appendChild(cancel);
  return pane;
}
