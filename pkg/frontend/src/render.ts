/** DOM widgets: one item at a time, a demographics form, a completion screen.
 *
 * Controls mirror the response schema exactly (one radio per category), the
 * submit button stays disabled until a selection exists, and everything is
 * reachable by keyboard (native radios and labeled inputs in focus order).
 */

import { DemographicFieldView, ItemView } from "./api.js";
import { Strings } from "./i18n.js";

function option(doc: Document, name: string, value: number, label: string): HTMLElement {
  const wrapper = doc.createElement("label");
  wrapper.className = "option";
  const input = doc.createElement("input");
  input.type = "radio";
  input.name = name;
  input.value = String(value);
  const text = doc.createElement("span");
  text.textContent = label;
  wrapper.appendChild(input);
  wrapper.appendChild(text);
  return wrapper;
}

function optionLabels(item: ItemView, strings: Strings): string[] {
  if (item.labels && item.labels.length === item.categories) {
    return item.labels;
  }
  if (item.categories === 2) {
    return [strings.binaryNo, strings.binaryYes];
  }
  return Array.from({ length: item.categories }, (_, index) => strings.optionFallback(index));
}

export function renderItem(
  doc: Document,
  item: ItemView,
  strings: Strings,
  onSubmit: (value: number) => void,
): HTMLElement {
  const root = doc.createElement("section");
  root.className = "item";
  root.dataset["itemId"] = item.item_id;

  const progress = doc.createElement("p");
  progress.className = "progress";
  progress.textContent = strings.progress(item.position - 1, item.max_items);
  const bar = doc.createElement("progress");
  bar.max = 1;
  bar.value = item.progress;
  root.appendChild(progress);
  root.appendChild(bar);

  const prompt = doc.createElement("h2");
  prompt.textContent = item.prompt;
  root.appendChild(prompt);

  const form = doc.createElement("form");
  const fieldset = doc.createElement("fieldset");
  for (const [index, label] of optionLabels(item, strings).entries()) {
    fieldset.appendChild(option(doc, "answer", index, label));
  }
  form.appendChild(fieldset);

  const hint = doc.createElement("p");
  hint.className = "hint";
  hint.hidden = true;
  hint.textContent = strings.selectFirst;
  form.appendChild(hint);

  const submit = doc.createElement("button");
  submit.type = "submit";
  submit.disabled = true;
  submit.textContent = strings.submit;
  form.appendChild(submit);

  const refresh = () => {
    submit.disabled = selectedValue(form) === null;
    hint.hidden = true;
  };
  // clicks on a radio or its label update :checked without a change event in
  // some DOM implementations, so listen to both
  form.addEventListener("change", refresh);
  form.addEventListener("click", refresh);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const value = selectedValue(form);
    if (value === null) {
      hint.hidden = false;
      return;
    }
    onSubmit(value);
  });

  root.appendChild(form);
  return root;
}

export function selectedValue(form: HTMLFormElement): number | null {
  const checked = form.querySelector<HTMLInputElement>("input[name=answer]:checked");
  return checked ? Number(checked.value) : null;
}

export function renderDemographics(
  doc: Document,
  fields: DemographicFieldView[],
  strings: Strings,
  onSubmit: (payload: Record<string, string>) => void,
): HTMLElement {
  const root = doc.createElement("section");
  root.className = "demographics";
  const title = doc.createElement("h2");
  title.textContent = strings.demographicsTitle;
  root.appendChild(title);

  const form = doc.createElement("form");
  for (const field of fields) {
    const label = doc.createElement("label");
    label.textContent = field.name;
    const input = doc.createElement("input");
    input.name = field.name;
    input.type = field.kind === "integer" ? "number" : "text";
    input.required = field.required;
    label.appendChild(input);
    form.appendChild(label);
  }
  const submit = doc.createElement("button");
  submit.type = "submit";
  submit.textContent = strings.begin;
  form.appendChild(submit);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const payload: Record<string, string> = {};
    for (const input of form.querySelectorAll<HTMLInputElement>("input")) {
      if (input.value !== "") {
        payload[input.name] = input.value;
      }
    }
    onSubmit(payload);
  });

  root.appendChild(form);
  return root;
}

export function renderCompletion(doc: Document, strings: Strings, itemsTaken: number): HTMLElement {
  // deliberately no score here: ability estimates stay on the server side
  const root = doc.createElement("section");
  root.className = "completion";
  const title = doc.createElement("h2");
  title.textContent = strings.completionTitle;
  const body = doc.createElement("p");
  body.textContent = strings.completionBody(itemsTaken);
  root.appendChild(title);
  root.appendChild(body);
  return root;
}
