import {
  CustomPackage,
  PackageInfo,
  PatientIntake,
  RecommendResponse,
} from "./types";

export interface EditorState {
  packageId: string;
  name: string;
  rows: { code: string; count: number }[];
  error: string | null;
  /** id of the catalog package this draft started from, if any */
  basedOn: string | null;
}

export interface AppState {
  form: PatientIntake;
  /** field name -> message; merged client + server-reported errors */
  fieldErrors: Record<string, string>;
  catalog: PackageInfo[];
  response: RecommendResponse | null;
  pending: boolean;
  /** transport failure to show in the retry banner */
  networkError: string | null;
  /** up to two package ids picked for the comparison pane */
  selection: string[];
  editor: EditorState | null;
  customCount: number;
  /** custom packages included in the last submission, by id */
  customPackages: Record<string, CustomPackage>;
}

export function initialState(): AppState {
  return {
    form: {
      baseline_carla: null,
      age_years: null,
      gender: "F",
      race: "White",
      diagnosis_category: "Depression",
      payer: "Medicaid",
      location: "",
      county: "",
      region_type: "Urban",
      prior_mobile_crisis: false,
      toms_symptom_baseline: null,
      toms_functioning_baseline: null,
    },
    fieldErrors: {},
    catalog: [],
    response: null,
    pending: false,
    networkError: null,
    selection: [],
    editor: null,
    customCount: 0,
    customPackages: {},
  };
}

export function knownServiceCodes(catalog: PackageInfo[]): Set<string> {
  const codes = new Set<string>();
  for (const pkg of catalog) {
    for (const code of Object.keys(pkg.service_volume)) codes.add(code);
  }
  return codes;
}

export function packageName(state: AppState, packageId: string): string {
  const custom = state.customPackages[packageId];
  if (custom) return custom.name;
  const pkg = state.catalog.find((p) => p.package_id === packageId);
  return pkg ? pkg.name : packageId;
}

export function packageVolumes(
  state: AppState,
  packageId: string,
): Record<string, number> | null {
  const custom = state.customPackages[packageId];
  if (custom) return custom.service_volume;
  const pkg = state.catalog.find((p) => p.package_id === packageId);
  return pkg ? pkg.service_volume : null;
}
