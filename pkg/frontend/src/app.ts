import { ApiClient } from "./api";
import {
  AppState,
  EditorState,
  initialState,
  knownServiceCodes,
  packageVolumes,
} from "./state";
import { Handlers, render } from "./render";
import { CustomPackage, FieldError, NetworkError } from "./types";
import {
  customPackageError,
  intakeErrors,
  intakeValid,
  patientPayload,
} from "./validation";

const NUMBER_FIELDS = new Set([
  "baseline_carla",
  "age_years",
  "toms_symptom_baseline",
  "toms_functioning_baseline",
]);

/**
 * One-page controller: all view state lives in ``state``; every change
 * re-renders the pure view. A single recommend request may be in flight;
 * newer submissions abort it and responses apply in submission order.
 */
export class App {
  state: AppState = initialState();
  private controller: AbortController | null = null;
  private nextSeq = 0;
  private appliedSeq = 0;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async start(): Promise<void> {
    this.renderNow();
    try {
      this.state.catalog = await this.api.packages();
      this.state.networkError = null;
    } catch (err) {
      this.state.networkError =
        err instanceof Error ? err.message : String(err);
    }
    this.renderNow();
  }

  renderNow(): void {
    render(this.root, this.state, this.handlers);
  }

  private readonly handlers: Handlers = {
    onFieldInput: (name, value) => this.updateField(name, value),
    onSubmit: () => void this.submitIntake(),
    onRetry: () => void this.retry(),
    onToggleSelect: (packageId) => this.toggleSelect(packageId),
    onEditPackage: (packageId) => this.openEditor(packageId),
    onEditorRow: (index, code, count) => this.updateEditorRow(index, code, count),
    onEditorAddRow: () => this.addEditorRow(),
    onEditorRemoveRow: (index) => this.removeEditorRow(index),
    onEditorName: (name) => this.updateEditorName(name),
    onEditorSubmit: () => void this.submitEditor(),
    onEditorCancel: () => this.closeEditor(),
  };

  updateField(name: string, value: string | boolean): void {
    const form = this.state.form as unknown as Record<string, unknown>;
    if (typeof value === "boolean") {
      form[name] = value;
    } else if (NUMBER_FIELDS.has(name)) {
      form[name] = value === "" ? null : Number(value);
    } else {
      form[name] = value;
    }
    delete this.state.fieldErrors[name];
    this.renderNow();
  }

  /** POST the intake; server field errors land inline next to controls. */
  async submitIntake(): Promise<void> {
    const errors = intakeErrors(this.state.form);
    if (Object.keys(errors).length > 0) {
      this.state.fieldErrors = errors;
      this.renderNow();
      return;
    }
    await this.requestRanking(Object.values(this.state.customPackages));
  }

  private async retry(): Promise<void> {
    if (this.state.catalog.length === 0) {
      await this.start();
      if (this.state.networkError) return;
    }
    if (intakeValid(this.state.form)) {
      await this.requestRanking(Object.values(this.state.customPackages));
    }
  }

  private async requestRanking(customs: CustomPackage[]): Promise<void> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const seq = ++this.nextSeq;
    this.state.pending = true;
    this.state.networkError = null;
    this.renderNow();
    try {
      const response = await this.api.recommend(
        {
          patient: patientPayload(this.state.form),
          ...(customs.length > 0 ? { custom_packages: customs } : {}),
        },
        controller.signal,
      );
      if (seq < this.appliedSeq) return; // a newer response already landed
      this.appliedSeq = seq;
      this.state.response = response;
      this.state.pending = this.nextSeq !== seq;
      this.state.fieldErrors = {};
      this.renderNow();
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return;
      if (seq < this.nextSeq) return; // superseded; ignore stale failures
      this.state.pending = false;
      if (err instanceof FieldError) {
        if (err.field) {
          this.state.fieldErrors = { [err.field]: err.message };
        } else {
          this.state.networkError = err.message;
        }
      } else if (err instanceof NetworkError) {
        this.state.networkError = err.message;
      } else {
        this.state.networkError = String(err);
      }
      this.renderNow();
    }
  }

  toggleSelect(packageId: string): void {
    const selection = this.state.selection;
    const at = selection.indexOf(packageId);
    if (at >= 0) {
      selection.splice(at, 1);
    } else {
      selection.push(packageId);
      while (selection.length > 2) selection.shift();
    }
    this.renderNow();
  }

  /** Open the what-if editor, optionally prefilled from a scored package. */
  openEditor(packageId: string | null): void {
    let rows: { code: string; count: number }[] = [{ code: "", count: 1 }];
    let name = "Custom package";
    if (packageId) {
      const volumes = packageVolumes(this.state, packageId);
      if (volumes) {
        rows = Object.entries(volumes).map(([code, count]) => ({ code, count }));
        name = `What if: ${packageId}`;
      }
    }
    this.state.editor = {
      packageId: `custom-${this.state.customCount + 1}`,
      name,
      rows,
      error: null,
      basedOn: packageId,
    } as EditorState;
    this.renderNow();
  }

  updateEditorRow(index: number, code: string, count: string): void {
    const editor = this.state.editor;
    if (!editor || !editor.rows[index]) return;
    editor.rows[index] = { code: code.trim(), count: Number(count) };
    editor.error = null;
    this.renderNow();
  }

  addEditorRow(): void {
    this.state.editor?.rows.push({ code: "", count: 1 });
    this.renderNow();
  }

  removeEditorRow(index: number): void {
    this.state.editor?.rows.splice(index, 1);
    this.renderNow();
  }

  updateEditorName(name: string): void {
    if (this.state.editor) this.state.editor.name = name;
  }

  closeEditor(): void {
    this.state.editor = null;
    this.renderNow();
  }

  /** Validate the draft locally, then re-score with it appended. */
  async submitEditor(): Promise<void> {
    const editor = this.state.editor;
    if (!editor) return;
    const volumes: Record<string, number> = {};
    for (const row of editor.rows) {
      if (row.code === "") continue;
      volumes[row.code] = row.count;
    }
    const draft: CustomPackage = {
      package_id: editor.packageId,
      name: editor.name,
      service_volume: volumes,
    };
    const problem = customPackageError(
      draft, knownServiceCodes(this.state.catalog),
    );
    if (problem) {
      editor.error = problem;
      this.renderNow();
      return;
    }
    this.state.customPackages[draft.package_id] = draft;
    this.state.customCount += 1;
    this.state.editor = null;
    await this.requestRanking(Object.values(this.state.customPackages));
  }
}
