/** Static string catalog. Two locales ship as proof of mechanism; unknown
 * tags fall back to English. */

export interface Strings {
  submit: string;
  begin: string;
  selectFirst: string;
  requiredField: string;
  progress: (answered: number, max: number) => string;
  completionTitle: string;
  completionBody: (count: number) => string;
  demographicsTitle: string;
  optionFallback: (index: number) => string;
  binaryNo: string;
  binaryYes: string;
  loading: string;
}

const EN: Strings = {
  submit: "Submit",
  begin: "Begin",
  selectFirst: "Choose an answer before submitting.",
  requiredField: "This field is required.",
  progress: (answered, max) => `Question ${answered + 1} of at most ${max}`,
  completionTitle: "All done!",
  completionBody: (count) => `You answered ${count} questions. You can close this window.`,
  demographicsTitle: "Before we begin",
  optionFallback: (index) => `Option ${index + 1}`,
  binaryNo: "No",
  binaryYes: "Yes",
  loading: "Loading…",
};

const DE: Strings = {
  submit: "Absenden",
  begin: "Starten",
  selectFirst: "Bitte zuerst eine Antwort auswählen.",
  requiredField: "Dieses Feld ist erforderlich.",
  progress: (answered, max) => `Frage ${answered + 1} von höchstens ${max}`,
  completionTitle: "Geschafft!",
  completionBody: (count) => `Sie haben ${count} Fragen beantwortet. Sie können das Fenster schließen.`,
  demographicsTitle: "Bevor es losgeht",
  optionFallback: (index) => `Option ${index + 1}`,
  binaryNo: "Nein",
  binaryYes: "Ja",
  loading: "Laden…",
};

const CATALOG: Record<string, Strings> = { en: EN, de: DE };

export function stringsFor(language: string): Strings {
  return CATALOG[language.toLowerCase().split("-")[0] ?? "en"] ?? EN;
}
